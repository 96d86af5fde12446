//! Synthetic access-trace generation and trace file I/O for reproducible
//! replay.
//!
//! Traces carry no timestamps: simulated time comes from the engine, from
//! `compute_ns_per_access` plus memory latencies, so the trace stays valid
//! whatever the policy under test does to access latencies.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mem::PageId;

pub const DEFAULT_COMPUTE_NS: f64 = 100.0;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceMeta {
    pub n_pages: u64,
    pub seed: u64,
    pub generator: String,
    pub params: String,
    pub compute_ns_per_access: f64,
}

/// An immutable, replayable sequence of page accesses.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub meta: TraceMeta,
    accesses: Vec<PageId>,
}

impl Trace {
    pub fn new(meta: TraceMeta, accesses: Vec<PageId>) -> Result<Self> {
        if let Some(&bad) = accesses.iter().find(|&&id| id >= meta.n_pages) {
            return Err(Error::Config(format!(
                "trace access to page {bad} outside n_pages={}",
                meta.n_pages
            )));
        }
        Ok(Self { meta, accesses })
    }

    pub fn accesses(&self) -> &[PageId] {
        &self.accesses
    }

    pub fn len(&self) -> usize {
        self.accesses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accesses.is_empty()
    }

    pub fn with_compute_ns(mut self, compute_ns: f64) -> Self {
        self.meta.compute_ns_per_access = compute_ns;
        self
    }

    pub fn working_set_bytes(&self, page_size: u64) -> u64 {
        self.meta.n_pages * page_size
    }
}

/// Hot/cold two-set generator: each access lands in the hot set with
/// probability `hot_prob`, uniform within the chosen set. The hot set is the
/// first ⌈n_pages × hot_fraction⌉ pages.
pub fn gen_stationary(
    n_pages: u64,
    hot_fraction: f64,
    hot_prob: f64,
    length: usize,
    seed: u64,
) -> Result<Trace> {
    if n_pages < 2 {
        return Err(Error::Config(
            "stationary generator needs >= 2 pages".into(),
        ));
    }
    if !(hot_fraction > 0.0 && hot_fraction < 1.0) {
        return Err(Error::OutOfRange {
            name: "hot_fraction",
            value: hot_fraction,
            range: "(0, 1)",
        });
    }
    if !(0.0..=1.0).contains(&hot_prob) {
        return Err(Error::OutOfRange {
            name: "hot_prob",
            value: hot_prob,
            range: "[0, 1]",
        });
    }
    let hot_count = ((n_pages as f64 * hot_fraction).ceil() as u64).clamp(1, n_pages - 1);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut accesses = Vec::with_capacity(length);
    for _ in 0..length {
        let id = if rng.random::<f64>() < hot_prob {
            rng.random_range(0..hot_count)
        } else {
            rng.random_range(hot_count..n_pages)
        };
        accesses.push(id);
    }

    Trace::new(
        TraceMeta {
            n_pages,
            seed,
            generator: "stationary".into(),
            params: format!("hot_fraction={hot_fraction},hot_prob={hot_prob},length={length}"),
            compute_ns_per_access: DEFAULT_COMPUTE_NS,
        },
        accesses,
    )
}

/// Shifting-window generator: accesses are uniform within a contiguous
/// window of `window_pages`; the window start advances by `window_pages`
/// every `shift_every` accesses, wrapping around the page range.
pub fn gen_shifting(
    n_pages: u64,
    window_pages: u64,
    shift_every: usize,
    length: usize,
    seed: u64,
) -> Result<Trace> {
    if n_pages == 0 || window_pages == 0 || window_pages > n_pages {
        return Err(Error::Config(format!(
            "shifting generator needs 0 < window_pages ({window_pages}) <= n_pages ({n_pages})"
        )));
    }
    if shift_every == 0 {
        return Err(Error::Config("shift_every must be positive".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut accesses = Vec::with_capacity(length);
    let mut window_start = 0u64;
    for i in 0..length {
        if i > 0 && i % shift_every == 0 {
            window_start = (window_start + window_pages) % n_pages;
        }
        let offset = rng.random_range(0..window_pages);
        accesses.push((window_start + offset) % n_pages);
    }

    Trace::new(
        TraceMeta {
            n_pages,
            seed,
            generator: "shifting".into(),
            params: format!(
                "window_pages={window_pages},shift_every={shift_every},length={length}"
            ),
            compute_ns_per_access: DEFAULT_COMPUTE_NS,
        },
        accesses,
    )
}

/// Zipf-popularity generator: page 0 is rank 1. Exponent 0 is uniform.
pub fn gen_zipf(n_pages: u64, exponent: f64, length: usize, seed: u64) -> Result<Trace> {
    if n_pages == 0 {
        return Err(Error::Config("zipf generator needs >= 1 page".into()));
    }
    if exponent.is_nan() || exponent < 0.0 {
        return Err(Error::OutOfRange {
            name: "exponent",
            value: exponent,
            range: "[0, inf)",
        });
    }

    // Inverse-CDF sampling over the precomputed cumulative rank weights.
    let mut cdf = Vec::with_capacity(n_pages as usize);
    let mut total = 0.0f64;
    for rank in 1..=n_pages {
        total += 1.0 / (rank as f64).powf(exponent);
        cdf.push(total);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut accesses = Vec::with_capacity(length);
    for _ in 0..length {
        let u = rng.random::<f64>() * total;
        let id = cdf.partition_point(|&c| c <= u) as u64;
        accesses.push(id.min(n_pages - 1));
    }

    Trace::new(
        TraceMeta {
            n_pages,
            seed,
            generator: "zipf".into(),
            params: format!("exponent={exponent},length={length}"),
            compute_ns_per_access: DEFAULT_COMPUTE_NS,
        },
        accesses,
    )
}

/// Writes the line-oriented trace format: `#key=value` header lines, then
/// one decimal page id per line.
pub fn save_trace(trace: &Trace, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("#n_pages={}\n", trace.meta.n_pages));
    out.push_str(&format!("#seed={}\n", trace.meta.seed));
    out.push_str(&format!("#generator={}\n", trace.meta.generator));
    out.push_str(&format!("#params={}\n", trace.meta.params));
    out.push_str(&format!(
        "#compute_ns_per_access={}\n",
        trace.meta.compute_ns_per_access
    ));
    for id in &trace.accesses {
        out.push_str(&format!("{id}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn load_trace(path: &Path) -> Result<Trace> {
    let text = fs::read_to_string(path)?;
    let path_str = path.display().to_string();
    let fail = |line: usize, msg: String| Error::TraceFormat {
        path: path_str.clone(),
        line,
        msg,
    };

    let mut n_pages = None;
    let mut seed = None;
    let mut generator = None;
    let mut params = None;
    let mut compute = None;
    let mut accesses = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('#') {
            let (key, value) = header
                .split_once('=')
                .ok_or_else(|| fail(lineno, format!("malformed header `{line}`")))?;
            match key {
                "n_pages" => {
                    n_pages = Some(
                        value
                            .parse::<u64>()
                            .map_err(|e| fail(lineno, format!("bad n_pages `{value}`: {e}")))?,
                    )
                }
                "seed" => {
                    seed = Some(
                        value
                            .parse::<u64>()
                            .map_err(|e| fail(lineno, format!("bad seed `{value}`: {e}")))?,
                    )
                }
                "generator" => generator = Some(value.to_string()),
                "params" => params = Some(value.to_string()),
                "compute_ns_per_access" => {
                    compute = Some(value.parse::<f64>().map_err(|e| {
                        fail(lineno, format!("bad compute_ns_per_access `{value}`: {e}"))
                    })?)
                }
                other => return Err(fail(lineno, format!("unknown header key `{other}`"))),
            }
            continue;
        }
        let id = line
            .parse::<u64>()
            .map_err(|e| fail(lineno, format!("bad page id `{line}`: {e}")))?;
        let limit =
            n_pages.ok_or_else(|| fail(lineno, "page id before #n_pages header".to_string()))?;
        if id >= limit {
            return Err(fail(
                lineno,
                format!("page id {id} out of range (n_pages={limit})"),
            ));
        }
        accesses.push(id);
    }

    let n_pages = n_pages.ok_or_else(|| fail(0, "missing #n_pages header".into()))?;
    Trace::new(
        TraceMeta {
            n_pages,
            seed: seed.unwrap_or(0),
            generator: generator.unwrap_or_default(),
            params: params.unwrap_or_default(),
            compute_ns_per_access: compute.unwrap_or(DEFAULT_COMPUTE_NS),
        },
        accesses,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stationary_extremes() {
        let hot = gen_stationary(100, 0.1, 1.0, 1000, 1).unwrap();
        assert!(hot.accesses().iter().all(|&id| id < 10));
        let cold = gen_stationary(100, 0.1, 0.0, 1000, 1).unwrap();
        assert!(cold.accesses().iter().all(|&id| id >= 10));
    }

    #[test]
    fn stationary_hot_share_matches_probability() {
        let trace = gen_stationary(1000, 0.1, 0.9, 1_000_000, 42).unwrap();
        let hot_hits = trace.accesses().iter().filter(|&&id| id < 100).count();
        let share = hot_hits as f64 / trace.len() as f64;
        assert!((share - 0.9).abs() < 0.01, "hot share {share}");
    }

    #[test]
    fn shifting_windows_are_disjoint_when_aligned() {
        let trace = gen_shifting(100, 10, 50, 150, 7).unwrap();
        let phase: Vec<&[PageId]> = trace.accesses().chunks(50).collect();
        assert!(phase[0].iter().all(|&id| id < 10));
        assert!(phase[1].iter().all(|&id| (10..20).contains(&id)));
        assert!(phase[2].iter().all(|&id| (20..30).contains(&id)));
    }

    #[test]
    fn shifting_degenerate_forms() {
        // No shift ever happens: stationary window.
        let trace = gen_shifting(100, 10, 1000, 1000, 7).unwrap();
        assert!(trace.accesses().iter().all(|&id| id < 10));
        // Window covering everything: uniform over all pages.
        let trace = gen_shifting(50, 50, 10, 5000, 7).unwrap();
        assert!(trace.accesses().iter().any(|&id| id >= 40));
        assert!(gen_shifting(10, 20, 10, 100, 7).is_err());
    }

    #[test]
    fn zipf_rank_ordering() {
        let trace = gen_zipf(1000, 1.1, 200_000, 9).unwrap();
        let count = |id: PageId| trace.accesses().iter().filter(|&&a| a == id).count();
        assert!(count(0) > count(9), "rank 1 should beat rank 10");
        assert!(gen_zipf(10, 0.5, 0, 9).unwrap().is_empty());
    }

    #[test]
    fn zipf_zero_exponent_is_uniform() {
        let trace = gen_zipf(10, 0.0, 100_000, 5).unwrap();
        let mut counts = [0usize; 10];
        for &a in trace.accesses() {
            counts[a as usize] += 1;
        }
        // Chi-square against uniform at desk scale: 9 dof, 99.9% cutoff 27.9.
        let expected = 10_000.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 27.9, "chi2 {chi2}");
    }

    #[test]
    fn generation_is_deterministic() {
        let a = gen_shifting(100, 10, 50, 10_000, 77).unwrap();
        let b = gen_shifting(100, 10, 50, 10_000, 77).unwrap();
        assert_eq!(a, b);
        let c = gen_shifting(100, 10, 50, 10_000, 78).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn save_load_round_trip() {
        let dir = std::env::temp_dir().join("hmdsim-workload-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("roundtrip.trace");

        let trace = gen_zipf(64, 1.0, 500, 3).unwrap().with_compute_ns(42.5);
        save_trace(&trace, &path).unwrap();
        let loaded = load_trace(&path).unwrap();
        assert_eq!(trace, loaded);

        // Byte-identical re-save.
        let bytes1 = std::fs::read(&path).unwrap();
        save_trace(&loaded, &path).unwrap();
        let bytes2 = std::fs::read(&path).unwrap();
        assert_eq!(bytes1, bytes2);
    }

    #[test]
    fn load_rejects_out_of_range_id_naming_line() {
        let dir = std::env::temp_dir().join("hmdsim-workload-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.trace");
        std::fs::write(&path, "#n_pages=4\n0\n1\n9\n").unwrap();
        let err = load_trace(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains(":4:"), "line number missing in `{msg}`");
        assert!(msg.contains("out of range"), "{msg}");
    }

    #[test]
    fn load_accepts_header_only_file() {
        let dir = std::env::temp_dir().join("hmdsim-workload-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("empty.trace");
        std::fs::write(&path, "#n_pages=4\n#seed=1\n").unwrap();
        let trace = load_trace(&path).unwrap();
        assert!(trace.is_empty());
        assert_eq!(trace.meta.n_pages, 4);
    }
}
