//! Max-min optimisation for the two upper bounds.
//!
//! Both searches start from a grid and refine with Nelder–Mead. Input
//! distributions are parametrised by their first `|X|−1` coordinates and
//! projected back onto the simplex; `P(J=0|x)` lives in the unit cube and
//! is clamped.

use argmin::core::{CostFunction, Error as ArgminError, Executor, State};
use argmin::solver::neldermead::NelderMead;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::entropy;
use crate::channel::ChannelSpec;
use crate::ir_pa::binary_entropy;
use crate::rng::labeled_stream;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Seed for the random restarts.
    pub seed: u64,
    /// Random restarts of the inner minimisation.
    pub restarts: usize,
    /// Grid step over binary input distributions.
    pub binary_step: f64,
    /// Grid step over larger input simplices.
    pub simplex_step: f64,
    /// Approximate number of grid points in the inner unit cube.
    pub inner_grid_points: usize,
    pub max_iters: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            restarts: 20,
            binary_step: 0.01,
            simplex_step: 0.05,
            inner_grid_points: 101 * 101,
            max_iters: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Eq5Optimum {
    pub value: f64,
    pub px: Vec<f64>,
    pub mutual_information: f64,
    pub conditional_entropy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Eq4Optimum {
    /// Inner minimum at the maximising input.
    pub value: f64,
    pub px: Vec<f64>,
    /// `P(J=0|x)` attaining the inner minimum.
    pub j_given_x: Vec<f64>,
}

/// Precomputed channel data for fast objective evaluation.
struct Evaluator<'a> {
    w: &'a [Vec<f64>],
    row_entropy: Vec<f64>,
}

impl<'a> Evaluator<'a> {
    fn new(channel: &'a ChannelSpec) -> Self {
        let w = channel.matrix();
        Self {
            w,
            row_entropy: w.iter().map(|row| entropy(row.iter().copied())).collect(),
        }
    }

    fn py(&self, px: &[f64]) -> Vec<f64> {
        let mut py = vec![0.0; self.w[0].len()];
        for (&p, row) in px.iter().zip(self.w) {
            for (acc, &w) in py.iter_mut().zip(row) {
                *acc += p * w;
            }
        }
        py
    }

    /// `(I(X;Y), H(X|Y))`.
    fn info_pair(&self, px: &[f64]) -> (f64, f64) {
        let hy = entropy(self.py(px));
        let hy_x: f64 = px.iter().zip(&self.row_entropy).map(|(p, h)| p * h).sum();
        let hx = entropy(px.iter().copied());
        let mi = hy - hy_x;
        (mi, hx - mi)
    }

    /// `I(X;J|Y) + I(X;Y|J) = 2H(J,Y) − H(Y) − H(J) − H(J|X) − H(Y|X)`,
    /// using the chain `J − X − Y`.
    fn eq4(&self, px: &[f64], py: &[f64], hy: f64, j0: &[f64], buf: &mut [f64]) -> f64 {
        buf.iter_mut().for_each(|v| *v = 0.0);
        let (mut pj0, mut hj_x, mut hy_x) = (0.0, 0.0, 0.0);
        for (x, (&p, row)) in px.iter().zip(self.w).enumerate() {
            let a = p * j0[x];
            pj0 += a;
            hj_x += p * binary_entropy(j0[x]);
            hy_x += p * self.row_entropy[x];
            for (acc, &w) in buf.iter_mut().zip(row) {
                *acc += a * w;
            }
        }
        let hjy = entropy(
            buf.iter()
                .zip(py)
                .flat_map(|(&a, &t)| [a, t - a]),
        );
        2.0 * hjy - hy - binary_entropy(pj0) - hj_x - hy_x
    }
}

/// `I(X;J|Y) + I(X;Y|J)` for input `px` and binary `J` with `P(J=0|x) = j0[x]`.
pub fn eq4_objective(channel: &ChannelSpec, px: &[f64], j0: &[f64]) -> f64 {
    let ev = Evaluator::new(channel);
    let py = ev.py(px);
    let hy = entropy(py.iter().copied());
    let mut buf = vec![0.0; py.len()];
    ev.eq4(px, &py, hy, j0, &mut buf)
}

/// Maps free coordinates to a point on the simplex.
fn to_simplex(free: &[f64]) -> Vec<f64> {
    let mut px: Vec<f64> = free.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let s: f64 = px.iter().sum();
    if s > 1.0 {
        px.iter_mut().for_each(|v| *v /= s);
    }
    let last = (1.0 - px.iter().sum::<f64>()).max(0.0);
    px.push(last);
    px
}

fn to_cube(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| x.clamp(0.0, 1.0)).collect()
}

/// All points of the simplex grid with spacing `1/steps`, as free coordinates.
fn simplex_grid(dim: usize, steps: usize) -> Vec<Vec<f64>> {
    fn rec(dim: usize, left: usize, steps: usize, cur: &mut Vec<f64>, out: &mut Vec<Vec<f64>>) {
        if cur.len() == dim {
            out.push(cur.clone());
            return;
        }
        for k in 0..=left {
            cur.push(k as f64 / steps as f64);
            rec(dim, left - k, steps, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(dim, steps, steps, &mut Vec::new(), &mut out);
    out
}

fn cube_grid(dim: usize, points: usize) -> Vec<Vec<f64>> {
    let per = ((points as f64).powf(1.0 / dim as f64) + 1e-9).floor().max(2.0) as usize;
    let mut out = vec![Vec::new()];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|v| {
                (0..per).map(move |k| {
                    let mut w = v.clone();
                    w.push(k as f64 / (per - 1) as f64);
                    w
                })
            })
            .collect();
    }
    out
}

struct Cost<F>(F);

impl<F: Fn(&[f64]) -> f64> CostFunction for Cost<F> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Vec<f64>) -> Result<f64, ArgminError> {
        Ok((self.0)(p))
    }
}

/// Nelder–Mead minimisation from `start`; returns the best point seen.
fn nelder_mead<F: Fn(&[f64]) -> f64>(f: F, start: &[f64], scale: f64, max_iters: u64) -> (Vec<f64>, f64) {
    let start_cost = f(start);
    let mut simplex = vec![start.to_vec()];
    for i in 0..start.len() {
        let mut v = start.to_vec();
        v[i] += if v[i] + scale <= 1.0 { scale } else { -scale };
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(1e-13)
        .expect("tolerance is positive");
    let best = Executor::new(Cost(&f), solver)
        .configure(|s| s.max_iters(max_iters))
        .run()
        .ok()
        .and_then(|r| {
            let state = r.state();
            Some((state.get_best_param()?.clone(), state.get_best_cost()))
        });
    match best {
        Some((p, c)) if c < start_cost => (p, c),
        _ => (start.to_vec(), start_cost),
    }
}

fn grid_for(inputs: usize, cfg: &OptimizerConfig) -> Vec<Vec<f64>> {
    let step = if inputs == 2 { cfg.binary_step } else { cfg.simplex_step };
    simplex_grid(inputs - 1, (1.0 / step).round().max(1.0) as usize)
}

/// `max_{P_X} min[I(X;Y), H(X|Y)]`.
pub fn upper_bound_eq5(channel: &ChannelSpec) -> Eq5Optimum {
    upper_bound_eq5_with(channel, &OptimizerConfig::default(), &[])
}

/// As [`upper_bound_eq5`], also evaluating the input distributions in `hints`.
pub fn upper_bound_eq5_with(channel: &ChannelSpec, cfg: &OptimizerConfig, hints: &[Vec<f64>]) -> Eq5Optimum {
    let ev = Evaluator::new(channel);
    let k = channel.num_inputs();
    let objective = |px: &[f64]| {
        let (mi, he) = ev.info_pair(px);
        mi.min(he)
    };
    let mut best = (f64::NEG_INFINITY, vec![1.0]);
    let consider = |best: &mut (f64, Vec<f64>), px: Vec<f64>| {
        let v = objective(&px);
        if v > best.0 {
            *best = (v, px);
        }
    };
    if k > 1 {
        for free in grid_for(k, cfg) {
            consider(&mut best, to_simplex(&free));
        }
        let start = best.1[..k - 1].to_vec();
        let (free, _) = nelder_mead(|f| -objective(&to_simplex(f)), &start, 0.02, cfg.max_iters);
        consider(&mut best, to_simplex(&free));
    } else {
        consider(&mut best, vec![1.0]);
    }
    for hint in hints.iter().filter(|h| h.len() == k) {
        consider(&mut best, hint.clone());
    }
    let (best, best_px) = best;
    let (mi, he) = ev.info_pair(&best_px);
    Eq5Optimum {
        value: best,
        px: best_px,
        mutual_information: mi,
        conditional_entropy: he,
    }
}

/// Inner minimum over `P(J=0|x)` at a fixed input.
fn inner_min(ev: &Evaluator, px: &[f64], grid: &[Vec<f64>], cfg: &OptimizerConfig) -> (f64, Vec<f64>) {
    let py = ev.py(px);
    let hy = entropy(py.iter().copied());
    let mut buf = vec![0.0; py.len()];
    let mut f = |j0: &[f64]| ev.eq4(px, &py, hy, j0, &mut buf);
    let (mut best, mut arg) = (f64::INFINITY, Vec::new());
    for point in grid {
        let v = f(point);
        if v < best {
            best = v;
            arg = point.clone();
        }
    }
    let mut rng = labeled_stream(cfg.seed, 0, "bounds/eq4-restarts");
    let mut starts = vec![arg.clone()];
    for _ in 0..cfg.restarts {
        starts.push((0..px.len()).map(|_| rng.gen::<f64>()).collect());
    }
    let buf = std::cell::RefCell::new(vec![0.0; py.len()]);
    let g = |j0: &[f64]| ev.eq4(px, &py, hy, &to_cube(j0), &mut buf.borrow_mut());
    for start in starts {
        let (p, _) = nelder_mead(g, &start, 0.05, cfg.max_iters);
        let cand = to_cube(&p);
        let v = g(&cand);
        if v < best {
            best = v;
            arg = cand;
        }
    }
    (best, arg)
}

/// `max_{P_X} min_{P_{J|X}} I(X;J|Y) + I(X;Y|J)` with binary `J`.
pub fn upper_bound_eq4_j2(channel: &ChannelSpec) -> Eq4Optimum {
    upper_bound_eq4_j2_with(channel, &OptimizerConfig::default())
}

pub fn upper_bound_eq4_j2_with(channel: &ChannelSpec, cfg: &OptimizerConfig) -> Eq4Optimum {
    let ev = Evaluator::new(channel);
    let k = channel.num_inputs();
    let cube = cube_grid(k, cfg.inner_grid_points);
    let outer = |px: &[f64]| inner_min(&ev, px, &cube, cfg);
    let mut best = Eq4Optimum {
        value: f64::NEG_INFINITY,
        px: Vec::new(),
        j_given_x: Vec::new(),
    };
    let consider = |best: &mut Eq4Optimum, px: Vec<f64>| {
        let (v, j) = outer(&px);
        if v > best.value {
            *best = Eq4Optimum {
                value: v,
                px,
                j_given_x: j,
            };
        }
    };
    if k == 1 {
        consider(&mut best, vec![1.0]);
        return best;
    }
    for free in grid_for(k, cfg) {
        consider(&mut best, to_simplex(&free));
    }
    let start = best.px[..k - 1].to_vec();
    let (free, _) = nelder_mead(|f| -outer(&to_simplex(f)).0, &start, 0.01, cfg.max_iters / 2);
    consider(&mut best, to_simplex(&free));
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{conditional_entropy_x_given_y, mutual_information, JointDist};
    use crate::channel::{make_bsec, make_example1, BsecParams};
    use proptest::prelude::*;

    fn bsec(p: f64, q: f64) -> ChannelSpec {
        make_bsec(BsecParams::new(p, q).unwrap())
    }

    /// Definition-level evaluation from the full joint `P(x, y, j)`.
    fn eq4_oracle(channel: &ChannelSpec, px: &[f64], j0: &[f64]) -> f64 {
        let w = channel.matrix();
        let (nx, ny) = (px.len(), w[0].len());
        let p = |x: usize, y: usize, j: usize| {
            let pj = if j == 0 { j0[x] } else { 1.0 - j0[x] };
            px[x] * w[x][y] * pj
        };
        let mut cond_xj_given_y = 0.0;
        let mut cond_xy_given_j = 0.0;
        for x in 0..nx {
            for y in 0..ny {
                for j in 0..2 {
                    let v = p(x, y, j);
                    if v <= 0.0 {
                        continue;
                    }
                    let pxy: f64 = (0..2).map(|jj| p(x, y, jj)).sum();
                    let pyj: f64 = (0..nx).map(|xx| p(xx, y, j)).sum();
                    let py: f64 = (0..nx).flat_map(|xx| (0..2).map(move |jj| (xx, jj))).map(|(xx, jj)| p(xx, y, jj)).sum();
                    let pxj: f64 = (0..ny).map(|yy| p(x, yy, j)).sum();
                    let pj: f64 = (0..nx).flat_map(|xx| (0..ny).map(move |yy| (xx, yy))).map(|(xx, yy)| p(xx, yy, j)).sum();
                    cond_xj_given_y += v * (v * py / (pxy * pyj)).log2();
                    cond_xy_given_j += v * (v * pj / (pxj * pyj)).log2();
                }
            }
        }
        cond_xj_given_y + cond_xy_given_j
    }

    fn quick() -> OptimizerConfig {
        OptimizerConfig {
            restarts: 4,
            binary_step: 0.05,
            inner_grid_points: 21 * 21,
            ..OptimizerConfig::default()
        }
    }

    #[test]
    fn grids() {
        assert_eq!(simplex_grid(1, 100).len(), 101);
        assert_eq!(simplex_grid(3, 20).len(), 1771);
        assert_eq!(cube_grid(2, 101 * 101).len(), 101 * 101);
        assert_eq!(cube_grid(4, 101 * 101).len(), 10usize.pow(4));
        let px = to_simplex(&[0.7, 0.6]);
        assert!((px[0] - 0.7 / 1.3).abs() < 1e-15 && (px[1] - 0.6 / 1.3).abs() < 1e-15 && px[2] == 0.0);
    }

    #[test]
    fn eq4_feasible_points() {
        let ch = bsec(0.2, 0.1);
        let px = [0.4, 0.6];
        let j = JointDist::new(px.to_vec(), &ch).unwrap();
        let constant = eq4_objective(&ch, &px, &[0.3, 0.3]);
        assert!((constant - mutual_information(&j)).abs() < 1e-12);
        let copy = eq4_objective(&ch, &px, &[1.0, 0.0]);
        assert!((copy - conditional_entropy_x_given_y(&j)).abs() < 1e-12);
    }

    #[test]
    fn trivial_channels() {
        assert!(upper_bound_eq5(&bsec(0.0, 0.0)).value.abs() < 1e-12);
        assert!(upper_bound_eq5(&bsec(0.0, 0.5)).value.abs() < 1e-12);
    }

    #[test]
    fn example_channel_eq5() {
        let opt = upper_bound_eq5(&make_example1());
        assert!((opt.value - 0.75).abs() < 1e-6, "{opt:?}");
        let j = JointDist::uniform(&make_example1());
        assert!((mutual_information(&j) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn eq4_below_eq5_and_consistent() {
        for (p, q) in [(0.1, 0.1), (0.1, 0.5), (0.3, 0.05)] {
            let ch = bsec(p, q);
            let e4 = upper_bound_eq4_j2_with(&ch, &quick());
            let e5 = upper_bound_eq5_with(&ch, &quick(), std::slice::from_ref(&e4.px));
            assert!(e4.value <= e5.value + 1e-6, "{p} {q}: {e4:?} {e5:?}");
            assert!((eq4_objective(&ch, &e4.px, &e4.j_given_x) - e4.value).abs() < 1e-12);
            let j = JointDist::new(e5.px.clone(), &ch).unwrap();
            let re = mutual_information(&j).min(conditional_entropy_x_given_y(&j));
            assert!((re - e5.value).abs() < 1e-12);
            let lb = crate::bounds::lower_bound_theorem1(p, q, 3).unwrap();
            assert!(lb <= e4.value + 1e-9);
        }
    }

    #[test]
    fn deterministic() {
        let ch = bsec(0.1, 0.2);
        assert_eq!(upper_bound_eq4_j2_with(&ch, &quick()), upper_bound_eq4_j2_with(&ch, &quick()));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn eq4_matches_definition(
            p in 0.0f64..=0.5, q in 0.0f64..=1.0, a in 0.0f64..=1.0,
            j0 in 0.0f64..=1.0, j1 in 0.0f64..=1.0,
        ) {
            let ch = bsec(p, q);
            let px = [a, 1.0 - a];
            let fast = eq4_objective(&ch, &px, &[j0, j1]);
            let slow = eq4_oracle(&ch, &px, &[j0, j1]);
            prop_assert!((fast - slow).abs() < 1e-9, "{} vs {}", fast, slow);
        }
    }
}
