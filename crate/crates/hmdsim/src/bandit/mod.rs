//! Contextual multi-armed bandit agent: a Q-network with discount zero over
//! a discrete grid of (burst, rate) threshold pairs, trained in a feedback
//! loop over decreasing local allocations with a context→reward cache so
//! repeated (context, action) pairs never rerun the simulator.

mod qnet;

pub use qnet::QNet;

use std::collections::{BTreeMap, VecDeque};
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::{full_local_baseline, run, SimConfig, SimPolicy, SimResult};
use crate::error::{Error, Result};
use crate::policy::PolicyKind;

pub const DEFAULT_BURST_GRID: [u32; 6] = [0, 1, 2, 4, 8, 16];
pub const DEFAULT_RATE_GRID: [f64; 7] = [0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0];

const AGENT_MAGIC: &[u8; 8] = b"HMDAGENT";
const AGENT_VERSION: u32 = 1;

/// Discrete action space: every (burst threshold, rate threshold) pair.
/// Arm index is the row-major position with burst as the row.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionGrid {
    pub burst: Vec<u32>,
    pub rate: Vec<f64>,
}

impl Default for ActionGrid {
    fn default() -> Self {
        Self {
            burst: DEFAULT_BURST_GRID.to_vec(),
            rate: DEFAULT_RATE_GRID.to_vec(),
        }
    }
}

impl ActionGrid {
    pub fn arm_count(&self) -> usize {
        self.burst.len() * self.rate.len()
    }

    pub fn thresholds(&self, arm: usize) -> (u32, f64) {
        let cols = self.rate.len();
        (self.burst[arm / cols], self.rate[arm % cols])
    }

    pub fn policy_for(&self, arm: usize, ablation: &AblationFlags) -> PolicyKind {
        let (theta_burst, theta_rate) = self.thresholds(arm);
        PolicyKind::Bandit {
            theta_burst: if ablation.disable_burst {
                0
            } else {
                theta_burst
            },
            theta_rate,
        }
    }
}

/// The four context features, each normalized to [0, 1]: allocation and the
/// usage peaks by working-set size, traffic by capacity × run duration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Context {
    pub local_alloc: f64,
    pub local_usage_peak: f64,
    pub remote_usage_peak: f64,
    pub network_traffic: f64,
}

impl Context {
    pub fn from_result(result: &SimResult, capacity_bps: f64) -> Self {
        let wss = result.working_set_bytes.max(1) as f64;
        let duration = result.completion_s().max(1e-12);
        let norm = |x: f64| x.clamp(0.0, 1.0);
        Self {
            local_alloc: norm(result.local_alloc as f64 / wss),
            local_usage_peak: norm(result.peak_local_used as f64 / wss),
            remote_usage_peak: norm(result.peak_remote_used as f64 / wss),
            network_traffic: norm(
                result.network_traffic_bytes() as f64 / (capacity_bps * duration),
            ),
        }
    }

    pub fn features(&self) -> [f64; 4] {
        [
            self.local_alloc,
            self.local_usage_peak,
            self.remote_usage_peak,
            self.network_traffic,
        ]
    }

    /// Cache key: each feature rounded to two decimal places.
    pub fn quantized(&self) -> [i64; 4] {
        self.features().map(|x| (x * 100.0).round() as i64)
    }

    pub fn masked(&self, ablation: &AblationFlags) -> Self {
        let mut ctx = *self;
        if ablation.disable_network_ctx {
            ctx.network_traffic = 0.0;
        }
        if ablation.disable_alloc_ctx {
            ctx.local_alloc = 0.0;
        }
        ctx
    }
}

/// Component switches for the ablation study.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AblationFlags {
    pub disable_burst: bool,
    pub disable_network_ctx: bool,
    pub disable_alloc_ctx: bool,
}

impl AblationFlags {
    pub fn none() -> Self {
        Self::default()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Transition {
    pub context: [f64; 4],
    pub arm: usize,
    pub reward: f64,
}

#[derive(Debug, Clone)]
pub struct BanditHyper {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub exploration_fraction: f64,
    pub buffer_capacity: usize,
}

impl Default for BanditHyper {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            learning_rate: 0.0005,
            batch_size: 32,
            exploration_fraction: 0.1,
            buffer_capacity: 10_000,
        }
    }
}

/// Q-learning agent with γ = 0: the regression target of a transition is
/// exactly its observed reward, which makes the network a contextual
/// multi-armed bandit solver.
#[derive(Debug, Clone)]
pub struct BanditAgent {
    pub grid: ActionGrid,
    pub qnet: QNet,
    pub hyper: BanditHyper,
    replay: VecDeque<Transition>,
    rng: ChaCha8Rng,
}

impl BanditAgent {
    pub fn new(grid: ActionGrid, hyper: BanditHyper, seed: u64) -> Self {
        let mut sizes = vec![4];
        sizes.extend(&hyper.hidden);
        sizes.push(grid.arm_count());
        let qnet = QNet::new(&sizes, hyper.learning_rate, seed);
        Self {
            grid,
            qnet,
            hyper,
            replay: VecDeque::new(),
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x5eed),
        }
    }

    pub fn q_values(&self, context: &Context) -> Vec<f64> {
        self.qnet.forward(&context.features())
    }

    /// ε-greedy selection: a uniform arm with probability ε, otherwise the
    /// argmax of the Q-outputs with ties broken toward the lowest index.
    /// At ε = 0 the generator is untouched, so choices depend only on the
    /// weights.
    pub fn select_action(&mut self, context: &Context, epsilon: f64) -> Result<usize> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::OutOfRange {
                name: "epsilon",
                value: epsilon,
                range: "[0, 1]",
            });
        }
        if epsilon > 0.0 && self.rng.random::<f64>() < epsilon {
            return Ok(self.rng.random_range(0..self.grid.arm_count()));
        }
        let q = self.q_values(context);
        let mut best = 0;
        for (i, &v) in q.iter().enumerate() {
            if v > q[best] {
                best = i;
            }
        }
        Ok(best)
    }

    pub fn push_transition(&mut self, transition: Transition) {
        if self.replay.len() == self.hyper.buffer_capacity {
            self.replay.pop_front();
        }
        self.replay.push_back(transition);
    }

    /// Uniform minibatch over the replay buffer (the whole buffer while it
    /// is still smaller than the batch size).
    pub fn sample_batch(&mut self) -> Vec<Transition> {
        if self.replay.is_empty() {
            return Vec::new();
        }
        if self.replay.len() <= self.hyper.batch_size {
            return self.replay.iter().copied().collect();
        }
        (0..self.hyper.batch_size)
            .map(|_| self.replay[self.rng.random_range(0..self.replay.len())])
            .collect()
    }

    /// One gradient step toward the batch rewards; returns the pre-step
    /// loss. With γ = 0 there is no bootstrap term.
    pub fn update(&mut self, batch: &[Transition]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let samples: Vec<(&[f64], usize, f64)> = batch
            .iter()
            .map(|t| (&t.context[..], t.arm, t.reward))
            .collect();
        self.qnet.sgd_step(&samples)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        buf.extend_from_slice(AGENT_MAGIC);
        buf.extend_from_slice(&AGENT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.grid.burst.len() as u32).to_le_bytes());
        for &b in &self.grid.burst {
            buf.extend_from_slice(&b.to_le_bytes());
        }
        buf.extend_from_slice(&(self.grid.rate.len() as u32).to_le_bytes());
        for &r in &self.grid.rate {
            buf.extend_from_slice(&r.to_le_bytes());
        }
        buf.extend_from_slice(&(self.qnet.sizes.len() as u32).to_le_bytes());
        for &s in &self.qnet.sizes {
            buf.extend_from_slice(&(s as u32).to_le_bytes());
        }
        buf.extend_from_slice(&self.qnet.learning_rate.to_le_bytes());
        for l in 0..self.qnet.weights.len() {
            for &w in &self.qnet.weights[l] {
                buf.extend_from_slice(&w.to_le_bytes());
            }
            for &b in &self.qnet.biases[l] {
                buf.extend_from_slice(&b.to_le_bytes());
            }
        }
        fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = fs::read(path)?;
        let mut cursor = &file[..];

        fn take<'a>(cursor: &mut &'a [u8], n: usize, what: &str) -> Result<&'a [u8]> {
            if cursor.len() < n {
                return Err(Error::AgentFormat(format!("truncated reading {what}")));
            }
            let (head, tail) = cursor.split_at(n);
            *cursor = tail;
            Ok(head)
        }
        fn take_u32(cursor: &mut &[u8], what: &str) -> Result<u32> {
            Ok(u32::from_le_bytes(
                take(cursor, 4, what)?.try_into().unwrap(),
            ))
        }
        fn take_f64(cursor: &mut &[u8], what: &str) -> Result<f64> {
            Ok(f64::from_le_bytes(
                take(cursor, 8, what)?.try_into().unwrap(),
            ))
        }

        let magic = take(&mut cursor, 8, "magic")?;
        if magic != AGENT_MAGIC {
            return Err(Error::AgentFormat("bad magic".into()));
        }
        let version = take_u32(&mut cursor, "version")?;
        if version != AGENT_VERSION {
            return Err(Error::AgentFormat(format!("unsupported version {version}")));
        }

        let n_burst = take_u32(&mut cursor, "burst grid length")? as usize;
        let mut burst = Vec::with_capacity(n_burst);
        for _ in 0..n_burst {
            burst.push(take_u32(&mut cursor, "burst grid")?);
        }
        let n_rate = take_u32(&mut cursor, "rate grid length")? as usize;
        let mut rate = Vec::with_capacity(n_rate);
        for _ in 0..n_rate {
            rate.push(take_f64(&mut cursor, "rate grid")?);
        }
        let grid = ActionGrid { burst, rate };

        let n_sizes = take_u32(&mut cursor, "layer count")? as usize;
        if n_sizes < 2 {
            return Err(Error::AgentFormat("layer count below 2".into()));
        }
        let mut sizes = Vec::with_capacity(n_sizes);
        for _ in 0..n_sizes {
            sizes.push(take_u32(&mut cursor, "layer sizes")? as usize);
        }
        if *sizes.last().unwrap() != grid.arm_count() {
            return Err(Error::AgentFormat(
                "output width disagrees with the action grid".into(),
            ));
        }
        let learning_rate = take_f64(&mut cursor, "learning rate")?;

        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 1..n_sizes {
            let n_w = sizes[l] * sizes[l - 1];
            let mut w = Vec::with_capacity(n_w);
            for _ in 0..n_w {
                w.push(take_f64(&mut cursor, "weights")?);
            }
            let mut b = Vec::with_capacity(sizes[l]);
            for _ in 0..sizes[l] {
                b.push(take_f64(&mut cursor, "biases")?);
            }
            weights.push(w);
            biases.push(b);
        }
        if !cursor.is_empty() {
            return Err(Error::AgentFormat(format!(
                "{} trailing bytes",
                cursor.len()
            )));
        }

        let hyper = BanditHyper {
            hidden: sizes[1..n_sizes - 1].to_vec(),
            learning_rate,
            ..BanditHyper::default()
        };
        Ok(Self {
            grid,
            qnet: QNet {
                sizes,
                weights,
                biases,
                learning_rate,
            },
            hyper,
            replay: VecDeque::new(),
            rng: ChaCha8Rng::seed_from_u64(0x5eed),
        })
    }
}

/// Reward of one episode: the negative completion time normalized by the
/// full-local-allocation runtime of the same workload.
pub fn episode_reward(completion_s: f64, baseline_s: f64) -> Result<f64> {
    if baseline_s.is_nan() || baseline_s <= 0.0 {
        return Err(Error::OutOfRange {
            name: "baseline_s",
            value: baseline_s,
            range: "(0, inf)",
        });
    }
    Ok(-(completion_s / baseline_s))
}

/// Mock completion time of a request-serving workload: the inverse of its
/// request throughput.
pub fn request_serving_completion(requests_per_s: f64) -> Result<f64> {
    if requests_per_s.is_nan() || requests_per_s <= 0.0 {
        return Err(Error::OutOfRange {
            name: "requests_per_s",
            value: requests_per_s,
            range: "(0, inf)",
        });
    }
    Ok(1.0 / requests_per_s)
}

/// Map from (quantized context, arm) to reward. A hit never touches the
/// simulator.
#[derive(Debug, Clone, Default)]
pub struct RewardCache {
    map: BTreeMap<([i64; 4], usize), f64>,
    pub hits: u64,
    pub misses: u64,
}

impl RewardCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn lookup(&mut self, context: &Context, arm: usize) -> Option<f64> {
        match self.map.get(&(context.quantized(), arm)) {
            Some(&r) => {
                self.hits += 1;
                Some(r)
            }
            None => {
                self.misses += 1;
                None
            }
        }
    }

    pub fn insert(&mut self, context: &Context, arm: usize, reward: f64) {
        self.map.insert((context.quantized(), arm), reward);
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn hit_rate(&self) -> f64 {
        let total = self.hits + self.misses;
        if total == 0 {
            0.0
        } else {
            self.hits as f64 / total as f64
        }
    }

    /// Rewards recorded for one quantized context, by arm.
    pub fn rewards_for(&self, context: &Context) -> Vec<(usize, f64)> {
        let key = context.quantized();
        self.map
            .iter()
            .filter(|((ctx, _), _)| *ctx == key)
            .map(|(&(_, arm), &r)| (arm, r))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct EpisodeRecord {
    pub allocation_frac: f64,
    pub episode: usize,
    pub context: [f64; 4],
    pub arm: usize,
    pub theta_burst: u32,
    pub theta_rate: f64,
    pub reward: f64,
    pub cached: bool,
    pub epsilon: f64,
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct AllocationSummary {
    pub allocation_frac: f64,
    pub episodes: usize,
    /// Engine runs spent on arm rewards at this allocation (cache misses).
    pub simulations: u64,
    pub cache_hit_rate: f64,
    /// Greedy arm at the end of this allocation's budget.
    pub final_arm: usize,
    pub final_theta_burst: u32,
    pub final_theta_rate: f64,
    pub final_arm_reward: f64,
    /// Best arm seen in the cache for this context, for reference.
    pub best_cached_arm: usize,
    pub best_cached_reward: f64,
}

#[derive(Debug, Clone)]
pub struct TrainingLog {
    pub baseline_completion_s: f64,
    pub episodes: Vec<EpisodeRecord>,
    pub allocations: Vec<AllocationSummary>,
    /// Engine runs spent probing per-allocation contexts.
    pub probe_runs: u64,
    pub total_simulations: u64,
    pub total_episodes: u64,
}

impl TrainingLog {
    pub fn cache_hit_rate(&self) -> f64 {
        if self.total_episodes == 0 {
            0.0
        } else {
            1.0 - self.total_simulations as f64 / self.total_episodes as f64
        }
    }
}

/// Training curriculum: allocations stepped from 90% down to 10% of the
/// working set, a fixed episode budget each.
#[derive(Debug, Clone)]
pub struct Curriculum {
    pub allocations: Vec<f64>,
    pub max_train: usize,
}

impl Default for Curriculum {
    fn default() -> Self {
        Self {
            allocations: (1..=9).rev().map(|i| i as f64 / 10.0).collect(),
            max_train: 2000,
        }
    }
}

/// Context of one configuration, measured from a migration-free probe run
/// at that allocation.
pub fn probe_context(base: &SimConfig, alloc_bytes: u64) -> Result<(Context, SimResult)> {
    let mut config = base.clone();
    config.tenants[0].local_alloc = alloc_bytes;
    config.tenants[0].policy = SimPolicy::Rule(PolicyKind::NoMigration);
    let result = run(&config)?;
    let ctx = Context::from_result(&result, config.link.capacity_bps);
    Ok((ctx, result))
}

/// Simulates one arm at one allocation and returns its reward.
pub fn episode_outcome(
    base: &SimConfig,
    alloc_bytes: u64,
    policy: PolicyKind,
    baseline_s: f64,
) -> Result<(f64, SimResult)> {
    let mut config = base.clone();
    config.tenants[0].local_alloc = alloc_bytes;
    config.tenants[0].policy = SimPolicy::Rule(policy);
    let result = run(&config)?;
    let reward = episode_reward(result.completion_s(), baseline_s)?;
    Ok((reward, result))
}

/// Runs the full training curriculum. Each episode selects an arm for the
/// allocation's probe context, consults the cache, simulates only on a
/// miss, and takes one gradient step on a replayed minibatch.
pub fn train_curriculum(
    agent: &mut BanditAgent,
    base: &SimConfig,
    curriculum: &Curriculum,
    cache: &mut RewardCache,
) -> Result<TrainingLog> {
    if base.tenants.len() != 1 {
        return Err(Error::Config(
            "training expects a single-tenant base".into(),
        ));
    }
    if base.tenants[0].trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    if curriculum.max_train == 0 || curriculum.allocations.is_empty() {
        return Err(Error::Config(
            "curriculum needs allocations and episodes".into(),
        ));
    }

    let wss = base.tenants[0].trace.working_set_bytes(base.page_size);
    let baseline = full_local_baseline(base)?;
    let baseline_s = baseline.completion_s();
    // Exploration anneals from 1 down to the configured fraction over the
    // first `exploration_fraction` of each allocation's budget, then stays
    // there. Each allocation is a fresh context, so exploration restarts.
    let eps_floor = agent.hyper.exploration_fraction;
    let anneal_span = ((curriculum.max_train as f64 * eps_floor).ceil() as usize).max(1);
    let epsilon_at = |episode: usize| -> f64 {
        if episode >= anneal_span {
            eps_floor
        } else {
            1.0 - (1.0 - eps_floor) * episode as f64 / anneal_span as f64
        }
    };

    let mut log = TrainingLog {
        baseline_completion_s: baseline_s,
        episodes: Vec::new(),
        allocations: Vec::new(),
        probe_runs: 0,
        total_simulations: 0,
        total_episodes: 0,
    };

    for &alloc_frac in &curriculum.allocations {
        let alloc_bytes = (wss as f64 * alloc_frac).round() as u64;
        let (context, _) = probe_context(base, alloc_bytes)?;
        log.probe_runs += 1;

        let mut sims_here = 0u64;
        let mut hits_here = 0u64;
        for episode in 0..curriculum.max_train {
            let epsilon = epsilon_at(episode);
            let arm = agent.select_action(&context, epsilon)?;
            let (theta_burst, theta_rate) = agent.grid.thresholds(arm);

            let (reward, cached) = match cache.lookup(&context, arm) {
                Some(r) => {
                    hits_here += 1;
                    (r, true)
                }
                None => {
                    let policy = PolicyKind::Bandit {
                        theta_burst,
                        theta_rate,
                    };
                    let (r, _) = episode_outcome(base, alloc_bytes, policy, baseline_s)?;
                    cache.insert(&context, arm, r);
                    sims_here += 1;
                    (r, false)
                }
            };

            agent.push_transition(Transition {
                context: context.features(),
                arm,
                reward,
            });
            let batch = agent.sample_batch();
            let loss = agent.update(&batch)?;

            log.episodes.push(EpisodeRecord {
                allocation_frac: alloc_frac,
                episode,
                context: context.features(),
                arm,
                theta_burst,
                theta_rate,
                reward,
                cached,
                epsilon,
                loss,
            });
        }

        let final_arm = agent.select_action(&context, 0.0)?;
        let (final_burst, final_rate) = agent.grid.thresholds(final_arm);
        let known = cache.rewards_for(&context);
        let &(best_arm, best_reward) = known
            .iter()
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
            .expect("at least one arm was evaluated");
        let final_reward = known
            .iter()
            .find(|&&(arm, _)| arm == final_arm)
            .map(|&(_, r)| r)
            .unwrap_or(f64::NEG_INFINITY);

        log.allocations.push(AllocationSummary {
            allocation_frac: alloc_frac,
            episodes: curriculum.max_train,
            simulations: sims_here,
            cache_hit_rate: hits_here as f64 / curriculum.max_train as f64,
            final_arm,
            final_theta_burst: final_burst,
            final_theta_rate: final_rate,
            final_arm_reward: final_reward,
            best_cached_arm: best_arm,
            best_cached_reward: best_reward,
        });
        log.total_simulations += sims_here;
        log.total_episodes += curriculum.max_train as u64;
    }

    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::TenantConfig;
    use crate::mem::InitialPlacement;
    use crate::workload::gen_shifting;

    fn tiny_agent(seed: u64) -> BanditAgent {
        BanditAgent::new(ActionGrid::default(), BanditHyper::default(), seed)
    }

    fn ctx(a: f64, b: f64, c: f64, d: f64) -> Context {
        Context {
            local_alloc: a,
            local_usage_peak: b,
            remote_usage_peak: c,
            network_traffic: d,
        }
    }

    #[test]
    fn grid_is_row_major_over_42_arms() {
        let grid = ActionGrid::default();
        assert_eq!(grid.arm_count(), 42);
        assert_eq!(grid.thresholds(0), (0, 0.125));
        assert_eq!(grid.thresholds(6), (0, 8.0));
        assert_eq!(grid.thresholds(7), (1, 0.125));
        assert_eq!(grid.thresholds(41), (16, 8.0));
    }

    #[test]
    fn greedy_selection_takes_lowest_tied_argmax() {
        let mut agent = tiny_agent(1);
        let context = ctx(0.5, 0.5, 0.5, 0.1);
        let arm = agent.select_action(&context, 0.0).unwrap();
        let q = agent.q_values(&context);
        let max = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(q[arm], max);
        assert!(q[..arm].iter().all(|&v| v < max));

        assert!(agent.select_action(&context, 1.5).is_err());
    }

    #[test]
    fn epsilon_one_is_the_rng_draw() {
        let mut a = tiny_agent(7);
        let mut b = tiny_agent(7);
        let context = ctx(0.2, 0.9, 0.4, 0.0);
        let picks_a: Vec<usize> = (0..20)
            .map(|_| a.select_action(&context, 1.0).unwrap())
            .collect();
        let picks_b: Vec<usize> = (0..20)
            .map(|_| b.select_action(&context, 1.0).unwrap())
            .collect();
        assert_eq!(picks_a, picks_b);
        assert!(picks_a.iter().any(|&x| x != picks_a[0]), "should vary");
    }

    #[test]
    fn update_fits_a_single_transition() {
        let mut agent = tiny_agent(3);
        let context = ctx(0.3, 0.8, 0.9, 0.05);
        let transition = Transition {
            context: context.features(),
            arm: 17,
            reward: -1.4,
        };
        let first_loss = agent.update(&[transition]).unwrap();
        let mut last_loss = first_loss;
        for _ in 0..4999 {
            last_loss = agent.update(&[transition]).unwrap();
        }
        let q = agent.q_values(&context)[17];
        assert!(
            (q - -1.4).abs() < 1e-2,
            "Q={q} after repeated updates (first loss {first_loss}, last {last_loss})"
        );
        assert!(last_loss < first_loss);
    }

    #[test]
    fn zero_error_update_leaves_weights_alone() {
        let mut agent = tiny_agent(4);
        let context = ctx(0.5, 0.5, 0.5, 0.5);
        let reward = agent.q_values(&context)[3];
        let before = agent.qnet.clone();
        let loss = agent
            .update(&[Transition {
                context: context.features(),
                arm: 3,
                reward,
            }])
            .unwrap();
        assert!(loss < 1e-30);
        assert_eq!(agent.qnet, before);
    }

    #[test]
    fn batch_update_smoke() {
        use rand::Rng;
        let mut agent = tiny_agent(5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let batch: Vec<Transition> = (0..32)
            .map(|_| Transition {
                context: [
                    rng.random::<f64>(),
                    rng.random::<f64>(),
                    rng.random::<f64>(),
                    rng.random::<f64>(),
                ],
                arm: rng.random_range(0..42),
                reward: -rng.random::<f64>() * 3.0,
            })
            .collect();
        let loss = agent.update(&batch).unwrap();
        assert!(loss.is_finite());
        assert!(agent.update(&[]).is_err());
        assert!(agent
            .update(&[Transition {
                context: [0.0; 4],
                arm: 0,
                reward: f64::INFINITY,
            }])
            .is_err());
    }

    #[test]
    fn rewards_normalize_against_baseline() {
        assert_eq!(episode_reward(10.0, 10.0).unwrap(), -1.0);
        assert_eq!(episode_reward(20.0, 10.0).unwrap(), -2.0);
        assert!(episode_reward(1.0, 0.0).is_err());
        // Request-serving mode: completion mocked as 1 / throughput.
        let mock = request_serving_completion(50.0).unwrap();
        assert_eq!(episode_reward(mock, 0.04).unwrap(), -0.5);
    }

    #[test]
    fn save_load_round_trip_preserves_choices() {
        let dir = std::env::temp_dir().join("hmdsim-bandit-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("agent.bin");

        let mut agent = tiny_agent(9);
        // Shape the weights a little before saving.
        for i in 0..50 {
            agent
                .update(&[Transition {
                    context: [0.1 * (i % 10) as f64, 0.5, 0.5, 0.0],
                    arm: i % 42,
                    reward: -1.0 - (i % 3) as f64,
                }])
                .unwrap();
        }
        agent.save(&path).unwrap();
        let mut loaded = BanditAgent::load(&path).unwrap();
        assert_eq!(agent.qnet, loaded.qnet);
        assert_eq!(agent.grid, loaded.grid);

        let context = ctx(0.3, 0.7, 0.6, 0.02);
        assert_eq!(
            agent.select_action(&context, 0.0).unwrap(),
            loaded.select_action(&context, 0.0).unwrap()
        );

        // Truncated file must not load.
        let bytes = std::fs::read(&path).unwrap();
        let cut = dir.join("truncated.bin");
        std::fs::write(&cut, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(
            BanditAgent::load(&cut),
            Err(Error::AgentFormat(_))
        ));
    }

    #[test]
    fn cache_tracks_hits_and_misses() {
        let mut cache = RewardCache::new();
        let context = ctx(0.304, 0.9, 0.7, 0.01);
        assert!(cache.lookup(&context, 5).is_none());
        cache.insert(&context, 5, -1.25);
        assert_eq!(cache.lookup(&context, 5), Some(-1.25));
        // Quantization folds nearby contexts onto the same key.
        let nearby = ctx(0.296, 0.9, 0.7, 0.012);
        assert_eq!(cache.lookup(&nearby, 5), Some(-1.25));
        assert_eq!(cache.hits, 2);
        assert_eq!(cache.misses, 1);
        assert_eq!(cache.len(), 1);
    }

    fn train_base(seed: u64) -> SimConfig {
        let trace = gen_shifting(64, 8, 250, 4000, seed).unwrap();
        SimConfig {
            tenants: vec![TenantConfig {
                trace,
                policy: SimPolicy::Rule(PolicyKind::NoMigration),
                local_alloc: 0,
                placement: InitialPlacement::FillLocalThenRemote,
            }],
            ..SimConfig::default()
        }
    }

    #[test]
    fn curriculum_cache_bounds_simulations() {
        let base = train_base(13);
        let mut agent = tiny_agent(13);
        let mut cache = RewardCache::new();
        let curriculum = Curriculum {
            allocations: vec![0.5],
            max_train: 100,
        };
        let log = train_curriculum(&mut agent, &base, &curriculum, &mut cache).unwrap();
        assert_eq!(log.total_episodes, 100);
        assert!(log.total_simulations <= 42, "{}", log.total_simulations);
        assert_eq!(log.allocations.len(), 1);
        assert_eq!(log.episodes.len(), 100);

        // Full curriculum bound: ≤ 42 distinct simulations per allocation.
        let curriculum = Curriculum {
            allocations: vec![0.9, 0.5, 0.1],
            max_train: 60,
        };
        let mut agent = tiny_agent(14);
        let mut cache = RewardCache::new();
        let log = train_curriculum(&mut agent, &base, &curriculum, &mut cache).unwrap();
        assert!(log.total_simulations <= 3 * 42);
        for alloc in &log.allocations {
            assert!(alloc.simulations <= 42);
        }
    }

    #[test]
    fn cached_rewards_match_fresh_simulation() {
        let base = train_base(15);
        let mut agent = tiny_agent(15);
        let mut cache = RewardCache::new();
        let curriculum = Curriculum {
            allocations: vec![0.3],
            max_train: 50,
        };
        let log = train_curriculum(&mut agent, &base, &curriculum, &mut cache).unwrap();

        // Re-simulate a handful of recorded episodes from scratch.
        let wss = base.tenants[0].trace.working_set_bytes(base.page_size);
        let baseline_s = log.baseline_completion_s;
        for record in log.episodes.iter().step_by(7).take(10) {
            let alloc_bytes = (wss as f64 * record.allocation_frac).round() as u64;
            let policy = PolicyKind::Bandit {
                theta_burst: record.theta_burst,
                theta_rate: record.theta_rate,
            };
            let (fresh, _) = episode_outcome(&base, alloc_bytes, policy, baseline_s).unwrap();
            assert_eq!(fresh, record.reward, "cache must equal fresh simulation");
        }
    }

    #[test]
    fn two_arm_bandit_learns_the_better_arm() {
        // Synthetic 1-context, 2-arm problem with a clear reward gap.
        let grid = ActionGrid {
            burst: vec![0],
            rate: vec![0.5, 4.0],
        };
        let mut agent = BanditAgent::new(grid, BanditHyper::default(), 21);
        let context = ctx(0.5, 0.8, 0.5, 0.1);
        let reward_of = |arm: usize| if arm == 1 { -1.0 } else { -2.0 };
        for i in 0..3000 {
            let eps = if i < 300 { 1.0 } else { 0.1 };
            let arm = agent.select_action(&context, eps).unwrap();
            agent.push_transition(Transition {
                context: context.features(),
                arm,
                reward: reward_of(arm),
            });
            let batch = agent.sample_batch();
            agent.update(&batch).unwrap();
        }
        assert_eq!(agent.select_action(&context, 0.0).unwrap(), 1);
        let q = agent.q_values(&context);
        assert!((q[1] - -1.0).abs() < 0.15, "q1={}", q[1]);
        assert!((q[0] - -2.0).abs() < 0.15, "q0={}", q[0]);
    }

    #[test]
    fn empty_trace_is_rejected() {
        let mut base = train_base(1);
        base.tenants[0].trace = crate::workload::gen_shifting(64, 8, 250, 0, 1).unwrap();
        let mut agent = tiny_agent(1);
        let mut cache = RewardCache::new();
        let err = train_curriculum(&mut agent, &base, &Curriculum::default(), &mut cache);
        assert!(matches!(err, Err(Error::EmptyTrace)));
    }
}
