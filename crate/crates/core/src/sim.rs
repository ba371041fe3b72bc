//! Seeded Monte Carlo: exact event-driven simulation of lattice models and
//! Euler simulation of MMBM between exact phase changes.
//!
//! Every path gets its own generator, seeded from the master seed and the
//! path index, and partial sums are pooled chunk by chunk in index order. The
//! estimate is therefore bit-identical whatever the number of threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::extrema::Direction;
use crate::linalg::Mat;
use crate::model::{LatticeModel, MmbmModel};

const CHUNK: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    /// Paths per starting phase.
    pub n_paths: u64,
    pub seed: u64,
    /// Paths leaving `[-level_cap, level_cap]` are censored.
    pub level_cap: f64,
    /// Paths still running at this time are censored.
    pub time_cap: f64,
    pub euler_dt: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_paths: 100_000,
            seed: 42,
            level_cap: 1e6,
            time_cap: f64::INFINITY,
            euler_dt: 1e-3,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::InvalidArgument("n_paths must be at least 1".into()));
        }
        if !(self.euler_dt > 0.0 && self.euler_dt.is_finite()) {
            return Err(Error::InvalidArgument("euler_dt must be positive".into()));
        }
        if !(self.level_cap > 0.0) || !(self.time_cap > 0.0) {
            return Err(Error::InvalidArgument("caps must be positive".into()));
        }
        Ok(())
    }
}

/// Row `i` of `mean` is estimated from paths started in phase `i`.
#[derive(Debug, Clone, Serialize)]
pub struct SimEstimate {
    #[serde(serialize_with = "ser_mat")]
    pub mean: Mat,
    #[serde(serialize_with = "ser_mat")]
    pub stderr: Mat,
    pub n: u64,
    pub seed: u64,
}

fn ser_mat<S: serde::Serializer>(m: &Mat, s: S) -> std::result::Result<S::Ok, S::Error> {
    crate::format::rows_of(m).serialize(s)
}

impl SimEstimate {
    /// Largest `|mean - exact| / stderr`, with zero-variance entries required
    /// to match to `1e-12`.
    pub fn max_z_score(&self, exact: &Mat) -> f64 {
        let mut worst: f64 = 0.0;
        for (k, (m, e)) in self.mean.iter().zip(exact.iter()).enumerate() {
            let se = self.stderr.as_slice()[k];
            let d = (m - e).abs();
            worst = worst.max(if se > 0.0 {
                d / se
            } else if d < 1e-12 {
                0.0
            } else {
                f64::INFINITY
            });
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "target", rename_all = "snake_case")]
pub enum LatticeTarget {
    /// `P[J_{tau_{-k}} = j]`.
    G { k: u64 },
    /// `P[tau_{-a} < tau_b^up, J]`.
    Exit { a: u64, b: u64 },
    /// `E[L(k, tau_{-l} ^ tau_m^up), J]`.
    StripOccupation { k: i64, l: u64, m: u64 },
    /// `P[tau_m = tau_m^up, J]`.
    Creeping { m: u64 },
    /// One cell of the extremum law at killing, pre-kill state.
    Extrema { direction: Direction, m: u64, l: u64 },
    /// First holding time; column 0 holds the estimate, other columns zero.
    HoldingTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "target", rename_all = "snake_case")]
pub enum MmbmTarget {
    /// `P[tau_{-a} < tau_b^+, J]`.
    Exit { a: f64, b: f64 },
    /// `P[J_{tau_{-x}}] = e^{G x}`.
    HitDown { x: f64 },
    /// `P[J_{tau_x}] = e^{Lambda x}`.
    HitUp { x: f64 },
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(index)))
}

/// Outcome of one path: a row vector contribution, or censoring.
enum PathResult {
    Done,
    Censored,
}

struct Sums {
    sum: Vec<f64>,
    sumsq: Vec<f64>,
    censored: u64,
}

/// Runs `n` paths from every starting phase and pools the per-path vectors.
fn run<F>(n_phases: usize, cfg: &SimConfig, path: F) -> Result<SimEstimate>
where
    F: Fn(usize, &mut ChaCha8Rng, &mut [f64]) -> PathResult + Sync,
{
    cfg.validate()?;
    let n = cfg.n_paths;
    let n_chunks = n.div_ceil(CHUNK);
    let mut mean = Mat::zeros(n_phases, n_phases);
    let mut stderr = Mat::zeros(n_phases, n_phases);
    let mut censored = 0;
    for start in 0..n_phases {
        let partial: Vec<Sums> = (0..n_chunks)
            .into_par_iter()
            .map(|c| {
                let mut s = Sums {
                    sum: vec![0.0; n_phases],
                    sumsq: vec![0.0; n_phases],
                    censored: 0,
                };
                let mut obs = vec![0.0; n_phases];
                for p in c * CHUNK..((c + 1) * CHUNK).min(n) {
                    let mut rng = path_rng(cfg.seed, start as u64 * n + p);
                    obs.iter_mut().for_each(|x| *x = 0.0);
                    match path(start, &mut rng, &mut obs) {
                        PathResult::Done => {
                            for j in 0..n_phases {
                                s.sum[j] += obs[j];
                                s.sumsq[j] += obs[j] * obs[j];
                            }
                        }
                        PathResult::Censored => s.censored += 1,
                    }
                }
                s
            })
            .collect();
        let mut sum = vec![0.0; n_phases];
        let mut sumsq = vec![0.0; n_phases];
        for s in &partial {
            censored += s.censored;
            for j in 0..n_phases {
                sum[j] += s.sum[j];
                sumsq[j] += s.sumsq[j];
            }
        }
        let nf = n as f64;
        for j in 0..n_phases {
            let m = sum[j] / nf;
            mean[(start, j)] = m;
            let var = if n > 1 {
                ((sumsq[j] - nf * m * m) / (nf - 1.0)).max(0.0)
            } else {
                0.0
            };
            stderr[(start, j)] = (var / nf).sqrt();
        }
    }
    if censored > 0 {
        return Err(Error::CapExceeded { count: censored });
    }
    Ok(SimEstimate {
        mean,
        stderr,
        n,
        seed: cfg.seed,
    })
}

/// Per-phase event table of a lattice model.
struct EventTable {
    rate: Vec<f64>,
    /// Cumulative rates with the jump and new phase; `None` marks killing.
    events: Vec<Vec<(f64, Option<(i64, usize)>)>>,
}

impl EventTable {
    fn new(model: &LatticeModel) -> Self {
        let n = model.n_phases();
        let rate: Vec<f64> = model.event_rates().iter().cloned().collect();
        let mut events = Vec::with_capacity(n);
        for i in 0..n {
            let mut acc = 0.0;
            let mut row = Vec::new();
            for (idx, b) in model.blocks().iter().enumerate() {
                let jump = idx as i64 - 1;
                for j in 0..n {
                    if jump == 0 && j == i {
                        continue;
                    }
                    if b[(i, j)] > 0.0 {
                        acc += b[(i, j)];
                        row.push((acc, Some((jump, j))));
                    }
                }
            }
            if model.kill_rates()[i] > 0.0 {
                acc += model.kill_rates()[i];
                row.push((acc, None));
            }
            // absorb rounding in the last threshold
            if let Some(last) = row.last_mut() {
                last.0 = f64::INFINITY;
            }
            events.push(row);
        }
        EventTable { rate, events }
    }

    fn step(&self, phase: usize, rng: &mut ChaCha8Rng) -> (f64, Option<(i64, usize)>) {
        let hold: f64 = Exp1.sample(rng);
        let dt = hold / self.rate[phase];
        let u = rng.random::<f64>() * self.rate[phase];
        let row = &self.events[phase];
        let k = row.partition_point(|e| e.0 <= u).min(row.len() - 1);
        (dt, row[k].1)
    }
}

/// Simulates the lattice chain from level 0 and returns per-phase estimates.
pub fn sim_lattice(model: &LatticeModel, target: LatticeTarget, cfg: &SimConfig) -> Result<SimEstimate> {
    let n = model.n_phases();
    if let LatticeTarget::Extrema { .. } = target {
        if !model.is_defective() {
            return Err(Error::NotDefective);
        }
    }
    match target {
        LatticeTarget::StripOccupation { k, l, m } if !(-(l as i64) < k && k < m as i64) => {
            return Err(Error::InvalidArgument("need -l < k < m".into()));
        }
        LatticeTarget::Exit { a, b } if a + b == 0 => {
            return Err(Error::InvalidArgument("need a + b > 0".into()));
        }
        LatticeTarget::G { k: 0 } => return Err(Error::InvalidArgument("k must be at least 1".into())),
        _ => {}
    }
    let table = EventTable::new(model);
    let cap = cfg.level_cap;
    run(n, cfg, |start, rng, obs| {
        let (mut x, mut phase, mut t) = (0i64, start, 0.0f64);
        let (mut hi, mut lo) = (0i64, 0i64);
        if let LatticeTarget::HoldingTime = target {
            let (dt, _) = table.step(phase, rng);
            obs[0] = dt;
            return PathResult::Done;
        }
        loop {
            let (dt, event) = table.step(phase, rng);
            if let LatticeTarget::StripOccupation { k, .. } = target {
                if x == k {
                    obs[phase] += dt;
                }
            }
            t += dt;
            let Some((jump, next)) = event else {
                // killed: only the extremum law records the pre-kill state
                if let LatticeTarget::Extrema { direction, m, l } = target {
                    let hit = match direction {
                        Direction::Max => hi == m as i64 && x == hi - l as i64,
                        Direction::Min => lo == -(m as i64) && x == lo + l as i64,
                    };
                    if hit {
                        obs[phase] = 1.0;
                    }
                }
                return PathResult::Done;
            };
            if t > cfg.time_cap {
                return PathResult::Censored;
            }
            x += jump;
            phase = next;
            hi = hi.max(x);
            lo = lo.min(x);
            if (x as f64).abs() > cap {
                return PathResult::Censored;
            }
            match target {
                LatticeTarget::G { k } => {
                    if x == -(k as i64) {
                        obs[phase] = 1.0;
                        return PathResult::Done;
                    }
                }
                LatticeTarget::Exit { a, b } => {
                    if x >= b as i64 {
                        return PathResult::Done;
                    }
                    if x == -(a as i64) {
                        obs[phase] = 1.0;
                        return PathResult::Done;
                    }
                }
                LatticeTarget::StripOccupation { l, m, .. } => {
                    if x >= m as i64 || x == -(l as i64) {
                        return PathResult::Done;
                    }
                }
                LatticeTarget::Creeping { m } => {
                    if x >= m as i64 {
                        if x == m as i64 {
                            obs[phase] = 1.0;
                        }
                        return PathResult::Done;
                    }
                }
                LatticeTarget::Extrema { .. } | LatticeTarget::HoldingTime => {}
            }
        }
    })
}

/// Euler scheme inside each phase sojourn; sojourn lengths, phase changes and
/// killing are drawn exactly. Barrier crossings are checked at step ends.
pub fn sim_mmbm(model: &MmbmModel, target: MmbmTarget, cfg: &SimConfig) -> Result<SimEstimate> {
    let n = model.n_phases();
    let (lower, upper) = match target {
        MmbmTarget::Exit { a, b } => {
            if !(a >= 0.0 && b >= 0.0 && a + b > 0.0) {
                return Err(Error::InvalidArgument("exit needs a, b >= 0 with a + b > 0".into()));
            }
            (-a, b)
        }
        MmbmTarget::HitDown { x } if x > 0.0 => (-x, f64::INFINITY),
        MmbmTarget::HitUp { x } if x > 0.0 => (f64::NEG_INFINITY, x),
        _ => return Err(Error::InvalidArgument("x must be positive".into())),
    };
    let q = model.generator();
    let kill = model.kill_rates();
    let drift = model.drift();
    let sd: Vec<f64> = model.sigma2().iter().map(|s| s.sqrt()).collect();
    let out_rate: Vec<f64> = (0..n).map(|i| -q[(i, i)] + kill[i]).collect();
    let dt = cfg.euler_dt;
    let sqdt = dt.sqrt();
    run(n, cfg, |start, rng, obs| {
        let (mut x, mut phase, mut t) = (0.0f64, start, 0.0f64);
        loop {
            let e: f64 = Exp1.sample(rng);
            let sojourn = if out_rate[phase] > 0.0 {
                e / out_rate[phase]
            } else {
                f64::INFINITY
            };
            let mut left = sojourn;
            while left > 0.0 {
                let h = left.min(dt);
                let noise: f64 = StandardNormal.sample(rng);
                let scale = if h == dt { sqdt } else { h.sqrt() };
                x += drift[phase] * h + sd[phase] * scale * noise;
                t += h;
                left -= h;
                if x <= lower {
                    let hit_lower = matches!(target, MmbmTarget::Exit { .. } | MmbmTarget::HitDown { .. });
                    if hit_lower {
                        obs[phase] = 1.0;
                    }
                    return PathResult::Done;
                }
                if x >= upper {
                    if let MmbmTarget::HitUp { .. } = target {
                        obs[phase] = 1.0;
                    }
                    return PathResult::Done;
                }
                if t > cfg.time_cap || x.abs() > cfg.level_cap {
                    return PathResult::Censored;
                }
            }
            // sojourn over: switch phase or die
            let u = rng.random::<f64>() * out_rate[phase];
            let mut acc = 0.0;
            let mut next = None;
            for j in 0..n {
                if j != phase {
                    acc += q[(phase, j)];
                    if u < acc {
                        next = Some(j);
                        break;
                    }
                }
            }
            match next {
                Some(j) => phase = j,
                None if kill[phase] > 0.0 => return PathResult::Done,
                // rounding left u just above the switching mass
                None => phase = (0..n).rev().find(|&j| j != phase && q[(phase, j)] > 0.0).unwrap_or(phase),
            }
        }
    })
}
