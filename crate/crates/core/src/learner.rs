//! Mean recovery: draw candidates, keep those a strict majority of tester
//! calls accept, cluster the survivors at 2ε and emit one point per cluster.

use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};
use std::time::Instant;

use crate::geometry::dist2;
use crate::rng::RngStream;
use crate::sampling::SampleSource;
use crate::special::ln_gamma;
use crate::tester::{self, check_separation_precondition, Constants, Profile, TesterParams, Verdict};
use crate::{Error, Result};

/// Default cap on drawn candidates.
pub const DEFAULT_CANDIDATE_CAP: u64 = 1_000_000;
/// Default cap on total samples consumed by one learning run.
pub const DEFAULT_SAMPLE_BUDGET: u64 = 20_000_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub k: usize,
    pub d: usize,
    pub delta: f64,
    pub eps: f64,
    /// c in R = ceil(c·ln N) tester repetitions per candidate.
    pub vote_multiplier: f64,
    pub profile: Profile,
    pub candidate_cap: u64,
    /// Total samples (candidates plus tester draws) allowed for the run.
    pub sample_budget: u64,
    /// Per-call tester budget cap.
    pub tester_budget_cap: u64,
    /// Overrides the profile's default constants.
    pub constants: Option<Constants>,
}

impl LearnerConfig {
    pub fn new(k: usize, d: usize, delta: f64, eps: f64, profile: Profile) -> Self {
        LearnerConfig {
            k,
            d,
            delta,
            eps,
            vote_multiplier: Constants::for_profile(profile).c_vote,
            profile,
            candidate_cap: DEFAULT_CANDIDATE_CAP,
            sample_budget: DEFAULT_SAMPLE_BUDGET,
            tester_budget_cap: tester::DEFAULT_BUDGET_CAP,
            constants: None,
        }
    }

    pub fn constants(&self) -> Constants {
        self.constants.unwrap_or_else(|| Constants::for_profile(self.profile))
    }

    /// Tester parameters for this configuration.
    pub fn tester_params(&self) -> Result<TesterParams> {
        tester::select_params_with(
            self.k,
            self.d,
            self.delta,
            self.eps,
            self.profile,
            &self.constants(),
            self.tester_budget_cap,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.vote_multiplier > 0.0) {
            return Err(Error::Precondition("vote_multiplier must be positive".into()));
        }
        check_separation_precondition(self.k, self.d, self.delta, self.eps, &self.constants())
    }
}

/// Output of a learning run.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnResult {
    pub means_hat: Vec<Vec<f64>>,
    /// Accepted candidates grouped by cluster, aligned with `means_hat`.
    pub clusters: Vec<Vec<Vec<f64>>>,
    pub candidates_drawn: u64,
    pub tester_calls: u64,
    pub wall_time_ms: u64,
}

impl Serialize for LearnResult {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let sizes: Vec<usize> = self.clusters.iter().map(Vec::len).collect();
        let mut st = s.serialize_struct("LearnResult", 5)?;
        st.serialize_field("means_hat", &self.means_hat)?;
        st.serialize_field("cluster_sizes", &sizes)?;
        st.serialize_field("candidates_drawn", &self.candidates_drawn)?;
        st.serialize_field("tester_calls", &self.tester_calls)?;
        st.serialize_field("wall_time_ms", &self.wall_time_ms)?;
        st.end()
    }
}

/// Probability p that a fixed component lands a sample within ε/2 of its mean
/// (divided by k), and the candidate count N = ceil(2 ln k / p).
///
/// Uses r* = min{ε/2, √d}, the maximiser of r^d e^{-r²/2} on [0, ε/2].
/// For k = 1 the count uses ln 2 so that at least one candidate is drawn.
pub fn candidate_budget(k: usize, d: usize, eps: f64) -> (f64, u64) {
    let df = d as f64;
    let r = (eps / 2.0).min(df.sqrt());
    let ln_p = df * r.ln() - r * r / 2.0
        - 0.5 * df * std::f64::consts::LN_2
        - (k as f64).ln()
        - ln_gamma(df / 2.0 + 1.0);
    let p = ln_p.exp();
    let n = (2.0 * (k.max(2) as f64).ln() / p).ceil() as u64;
    (p, n)
}

/// As [`candidate_budget`], failing above `cap`.
pub fn candidate_budget_capped(k: usize, d: usize, eps: f64, cap: u64) -> Result<(f64, u64)> {
    if k == 0 || d == 0 || !(eps > 0.0) {
        return Err(Error::Precondition("candidate budget needs k, d >= 1 and eps > 0".into()));
    }
    let (p, n) = candidate_budget(k, d, eps);
    if n > cap {
        return Err(Error::CandidateBudgetExceeded { required: n, cap });
    }
    Ok((p, n))
}

/// Fails when a precomputed candidate count exceeds `cap`.
pub(crate) fn candidate_budget_capped_with(n: u64, cap: u64) -> Result<()> {
    if n > cap {
        return Err(Error::CandidateBudgetExceeded { required: n, cap });
    }
    Ok(())
}

/// Repetitions R = ceil(c·ln N), at least 1.
pub fn vote_count(multiplier: f64, n_candidates: u64) -> u64 {
    ((multiplier * (n_candidates as f64).ln()).ceil() as u64).max(1)
}

/// Single-linkage partition: indices chained through distances ≤ `threshold` share a block.
///
/// Blocks are ordered by their smallest index, members ascending.
pub fn cluster(points: &[Vec<f64>], threshold: f64) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let t2 = threshold * threshold;
    for i in 0..n {
        for j in i + 1..n {
            if dist2(&points[i], &points[j]) <= t2 {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = blocks.len();
            blocks.push(Vec::new());
        }
        blocks[slot[r]].push(i);
    }
    blocks
}

/// Shared vote-and-cluster loop behind [`learn`] and the general-family learner.
pub(crate) struct VotePlan {
    pub k: usize,
    pub d: usize,
    pub eps: f64,
    pub n_candidates: u64,
    pub votes: u64,
    pub samples_per_call: u64,
    pub sample_budget: u64,
}

pub(crate) fn vote_and_cluster<S, T>(source: &mut S, plan: &VotePlan, rng: &RngStream, mut tester: T) -> Result<LearnResult>
where
    S: SampleSource + ?Sized,
    T: FnMut(&mut S, &[f64], &RngStream) -> Result<Verdict>,
{
    let start = Instant::now();
    let required = plan.n_candidates as f64 * (1.0 + plan.votes as f64 * plan.samples_per_call as f64);
    if required > plan.sample_budget as f64 {
        return Err(Error::SampleBudgetExceeded { required, cap: plan.sample_budget });
    }
    let d = plan.d;
    let mut flat = vec![0.0; plan.n_candidates as usize * d];
    source.fill(&mut flat)?;
    let candidates: Vec<Vec<f64>> = flat.chunks_exact(d).map(<[f64]>::to_vec).collect();

    let mut accepted: Vec<(usize, u64)> = Vec::new();
    let mut calls = 0u64;
    for (i, c) in candidates.iter().enumerate() {
        let mut yes = 0u64;
        for r in 0..plan.votes {
            let v = tester(source, c, &rng.substream(i as u64 * plan.votes + r))?;
            calls += 1;
            yes += v.accepted() as u64;
        }
        // Strict majority; even-R ties reject.
        if 2 * yes > plan.votes {
            accepted.push((i, yes));
        }
    }

    let pts: Vec<Vec<f64>> = accepted.iter().map(|&(i, _)| candidates[i].clone()).collect();
    let blocks = cluster(&pts, 2.0 * plan.eps);
    if blocks.len() != plan.k {
        return Err(Error::ClusterCountMismatch { found: blocks.len(), expected: plan.k });
    }
    // Representative: the medoid (least total distance to its cluster), then most votes, then earliest index.
    let means_hat = blocks
        .iter()
        .map(|b| {
            let spread = |m: usize| b.iter().map(|&o| crate::geometry::dist(&pts[m], &pts[o])).sum::<f64>();
            let best = b
                .iter()
                .copied()
                .min_by(|&x, &y| {
                    spread(x)
                        .total_cmp(&spread(y))
                        .then(accepted[y].1.cmp(&accepted[x].1))
                        .then(x.cmp(&y))
                })
                .expect("nonempty");
            pts[best].clone()
        })
        .collect();
    let clusters = blocks.iter().map(|b| b.iter().map(|&m| pts[m].clone()).collect()).collect();
    Ok(LearnResult {
        means_hat,
        clusters,
        candidates_drawn: plan.n_candidates,
        tester_calls: calls,
        wall_time_ms: start.elapsed().as_millis() as u64,
    })
}

/// Learns the k means of a spherical Gaussian mixture from `source`.
pub fn learn<S: SampleSource + ?Sized>(source: &mut S, config: &LearnerConfig, rng: &RngStream) -> Result<LearnResult> {
    config.validate()?;
    if source.dim() != config.d {
        return Err(Error::DimensionMismatch { expected: config.d, found: source.dim() });
    }
    let params = config.tester_params()?;
    let (_, n_candidates) = candidate_budget_capped(config.k, config.d, config.eps, config.candidate_cap)?;
    let plan = VotePlan {
        k: config.k,
        d: config.d,
        eps: config.eps,
        n_candidates,
        votes: vote_count(config.vote_multiplier, n_candidates),
        samples_per_call: params.n,
        sample_budget: config.sample_budget,
    };
    vote_and_cluster(source, &plan, rng, |src, c, r| tester::test(src, c, &params, r))
}
