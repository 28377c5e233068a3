//! Nullspace probing of the linearised alignment system.
//!
//! For fixed beams `(U, V)` the zero-forcing conditions are linear in the
//! free channel entries `h`: `P(U, V) h = 0`. Drawing random beams, solving
//! for `h` and stacking the solutions gives an empirical picture of which
//! part of the channel space admits alignment. Whether the span of the
//! solutions equals the whole space is only a heuristic indicator of
//! feasibility: a linear combination of solvable channels need not be
//! solvable.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::counting::equation_count;
use crate::error::{Error, Result};
use crate::linalg::{column_basis, nullspace as svd_nullspace};
use crate::model::{ChannelSet, IaSolution, SystemConfig};
use crate::rng::{substream, DOMAIN_PROBE};
use crate::scalar::{CMat, Cx, Real};

/// Column offsets of each cross pair `(rx, tx)` inside a channel vector.
fn pair_offsets(cfg: &SystemConfig) -> Vec<((usize, usize), usize)> {
    let mut off = 0;
    cfg.cross_pairs()
        .map(|p| {
            let here = off;
            off += cfg.free_entries_in(p.0, p.1);
            (p, here)
        })
        .collect()
}

/// Coefficient matrix of the channel entries in the zero-forcing system.
///
/// Rows run over cross pairs `(j, k)` (rx-major) and stream pairs `(m, n)`;
/// columns over the free channel entries of each cross pair in
/// [`SystemConfig::free_positions`] order. The entry for channel position
/// `(t, r)` of `H[j][k]` in row `(j, k, m, n)` is `conj(U[j][t, m]) V[k][r, n]`.
pub fn build_p_matrix<T: Real>(cfg: &SystemConfig, sol: &IaSolution<T>) -> Result<CMat<T>> {
    cfg.validate()?;
    sol.matches(cfg)?;
    let rows = equation_count(&cfg.streams);
    let rows: usize = rows
        .try_into()
        .map_err(|_| Error::DimensionMismatch("equation count does not fit in memory".into()))?;
    let cols = cfg.free_entry_count(false);
    let mut p = CMat::zeros(rows, cols);
    let mut row = 0;
    for ((j, k), col0) in pair_offsets(cfg) {
        let positions = cfg.free_positions(j, k);
        let (u, v) = (&sol.u[j], &sol.v[k]);
        for m in 0..u.ncols() {
            for n in 0..v.ncols() {
                for (c, &(t, r)) in positions.iter().enumerate() {
                    p[(row, col0 + c)] = u[(t, m)].conj() * v[(r, n)];
                }
                row += 1;
            }
        }
    }
    Ok(p)
}

/// Flatten the free cross-channel entries in probe column order.
pub fn channel_vector<T: Real>(cfg: &SystemConfig, ch: &ChannelSet<T>) -> DVector<Cx<T>> {
    let mut out = Vec::with_capacity(cfg.free_entry_count(false));
    for (j, k) in cfg.cross_pairs() {
        let h = ch.get(j, k);
        out.extend(cfg.free_positions(j, k).into_iter().map(|pos| h[pos]));
    }
    DVector::from_vec(out)
}

/// Inverse of [`channel_vector`]; direct links are left at zero.
pub fn channels_from_vector<T: Real>(cfg: &SystemConfig, h: &[Cx<T>]) -> Result<ChannelSet<T>> {
    let expected = cfg.free_entry_count(false);
    if h.len() != expected {
        return Err(Error::DimensionMismatch(format!("channel vector has {} entries, expected {expected}", h.len())));
    }
    let mut ch = ChannelSet::zeros(cfg);
    for ((j, k), col0) in pair_offsets(cfg) {
        let m = ch.get_mut(j, k);
        for (c, pos) in cfg.free_positions(j, k).into_iter().enumerate() {
            m[pos] = h[col0 + c];
        }
    }
    Ok(ch)
}

/// Orthonormal basis of the right nullspace (canonical form, possibly empty).
pub fn nullspace<T: Real>(p: &CMat<T>) -> CMat<T> {
    svd_nullspace(p)
}

/// Beams for draw `index` of a probe run seeded with `seed`.
pub fn draw_beams<T: Real>(cfg: &SystemConfig, seed: u64, index: usize) -> IaSolution<T> {
    let mut rng = substream(seed, &[DOMAIN_PROBE, index as u64]);
    IaSolution::random(&cfg.signal_dims, &cfg.streams, &mut rng)
}

/// Beams and channel-solution basis for one probe draw.
pub fn probe_draw<T: Real>(cfg: &SystemConfig, seed: u64, index: usize) -> Result<(IaSolution<T>, CMat<T>)> {
    let beams = draw_beams(cfg, seed, index);
    let basis = nullspace(&build_p_matrix(cfg, &beams)?);
    Ok((beams, basis))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ProbeReport {
    pub config: SystemConfig,
    pub seed: u64,
    pub draws: usize,
    /// Draws whose nullspace is at least one-dimensional.
    pub nontrivial_draws: usize,
    pub per_draw_nullity: Vec<usize>,
    /// Span rank after each draw.
    pub span_rank_trajectory: Vec<usize>,
    pub span_rank: usize,
    /// Dimension of the free cross-channel space.
    pub dim_target: usize,
    #[serde(rename = "N_e")]
    pub equations: usize,
    /// `dim_target - 1`.
    pub sd_upper_bound: i64,
    /// `span_rank == dim_target`; a heuristic, see [`ProbeReport::filled_is_heuristic`].
    pub filled: bool,
    /// Always true: span equality does not prove that every channel is solvable.
    pub filled_is_heuristic: bool,
}

/// Draws processed per parallel batch.
const BATCH: usize = 64;

/// Probe the solution space with `draws` random beam draws.
///
/// Draws are solved in parallel; the span is accumulated sequentially in
/// draw order, keeping only an orthonormal basis of the running span
/// (at most `dim_target` columns).
pub fn run_probe<T: Real>(cfg: &SystemConfig, draws: usize, seed: u64) -> Result<ProbeReport> {
    cfg.validate()?;
    if draws == 0 {
        return Err(Error::InvalidParameter("probe needs at least one draw".into()));
    }
    let dim_target = cfg.free_entry_count(false);
    let equations: usize = equation_count(&cfg.streams)
        .try_into()
        .map_err(|_| Error::DimensionMismatch("equation count does not fit in memory".into()))?;
    let mut span = CMat::<T>::zeros(dim_target, 0);
    let mut per_draw_nullity = Vec::with_capacity(draws);
    let mut trajectory = Vec::with_capacity(draws);
    let mut start = 0;
    while start < draws {
        let end = (start + BATCH).min(draws);
        let bases: Vec<CMat<T>> = (start..end)
            .into_par_iter()
            .map(|i| probe_draw::<T>(cfg, seed, i).map(|(_, b)| b))
            .collect::<Result<_>>()?;
        for basis in bases {
            per_draw_nullity.push(basis.ncols());
            if basis.ncols() > 0 && span.ncols() < dim_target {
                let mut stacked = CMat::zeros(dim_target, span.ncols() + basis.ncols());
                stacked.columns_mut(0, span.ncols()).copy_from(&span);
                stacked.columns_mut(span.ncols(), basis.ncols()).copy_from(&basis);
                span = column_basis(&stacked, None);
            }
            trajectory.push(span.ncols());
        }
        start = end;
    }
    let span_rank = span.ncols();
    Ok(ProbeReport {
        config: cfg.clone(),
        seed,
        draws,
        nontrivial_draws: per_draw_nullity.iter().filter(|&&n| n > 0).count(),
        per_draw_nullity,
        span_rank_trajectory: trajectory,
        span_rank,
        dim_target,
        equations,
        sd_upper_bound: dim_target as i64 - 1,
        filled: span_rank == dim_target,
        filled_is_heuristic: true,
    })
}

impl ProbeReport {
    /// `draw,nullity,span_rank` rows.
    pub fn nullity_csv(&self) -> String {
        let mut out = String::from("draw,nullity,span_rank\n");
        for (i, (n, s)) in self.per_draw_nullity.iter().zip(&self.span_rank_trajectory).enumerate() {
            out.push_str(&format!("{i},{n},{s}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::numerical_rank;
    use crate::verify::leakage;

    fn ones(rows: usize, cols: usize) -> CMat<f64> {
        CMat::from_element(rows, cols, Cx::new(1.0, 0.0))
    }

    #[test]
    fn diagonal_p_shape_and_block_structure() {
        let cfg = SystemConfig::diagonal(2, vec![1, 1, 1]);
        let sol = draw_beams::<f64>(&cfg, 3, 0);
        let p = build_p_matrix(&cfg, &sol).unwrap();
        assert_eq!(p.shape(), (6, 12));
        for r in 0..6 {
            for c in 0..12 {
                if c / 2 != r {
                    assert_eq!(p[(r, c)], Cx::new(0.0, 0.0), "({r},{c})");
                }
            }
        }
    }

    #[test]
    fn all_ones_beams_give_unit_blocks() {
        let cfg = SystemConfig::diagonal(2, vec![1, 1, 1]);
        let sol = IaSolution::new(vec![ones(2, 1); 3], vec![ones(2, 1); 3]).unwrap();
        let p = build_p_matrix(&cfg, &sol).unwrap();
        for r in 0..6 {
            assert_eq!(p[(r, 2 * r)], Cx::new(1.0, 0.0));
            assert_eq!(p[(r, 2 * r + 1)], Cx::new(1.0, 0.0));
        }
        assert_eq!(numerical_rank(&p, None), 6);
        assert_eq!(nullspace(&p).ncols(), 6);
    }

    #[test]
    fn generic_p_rows_have_four_nonzeros() {
        let cfg = SystemConfig::symmetric(3, 2, 1);
        let sol = draw_beams::<f64>(&cfg, 5, 0);
        let p = build_p_matrix(&cfg, &sol).unwrap();
        assert_eq!(p.shape(), (6, 24));
        for r in 0..6 {
            let nz = (0..24).filter(|&c| p[(r, c)].norm() > 0.0).count();
            assert_eq!(nz, 4);
        }
        // coefficient pattern conj(u_t) v_r
        let (u, v) = (&sol.u[0], &sol.v[1]);
        assert!((p[(0, 1)] - u[(0, 0)].conj() * v[(1, 0)]).norm() < 1e-15);
        assert!((p[(0, 2)] - u[(1, 0)].conj() * v[(0, 0)]).norm() < 1e-15);
    }

    #[test]
    fn p_matches_bilinear_form() {
        let cfg = SystemConfig::block_diagonal(vec![2, 1, 2], 2, vec![2, 1, 1]).with_seed(8);
        let ch: ChannelSet<f64> = crate::model::sample_channels(&cfg).unwrap();
        let sol = draw_beams::<f64>(&cfg, 8, 1);
        let p = build_p_matrix(&cfg, &sol).unwrap();
        let lhs = &p * channel_vector(&cfg, &ch);
        let mut rhs = Vec::new();
        for (j, k) in cfg.cross_pairs() {
            let m = sol.u[j].adjoint() * ch.get(j, k) * &sol.v[k];
            for a in 0..m.nrows() {
                for b in 0..m.ncols() {
                    rhs.push(m[(a, b)]);
                }
            }
        }
        assert!((lhs - DVector::from_vec(rhs)).norm() < 1e-12);
    }

    #[test]
    fn channel_vector_roundtrip() {
        let cfg = SystemConfig::diagonal(3, vec![1, 1, 1]).with_seed(2);
        let mut ch: ChannelSet<f64> = crate::model::sample_channels(&cfg).unwrap();
        let h = channel_vector(&cfg, &ch);
        let back = channels_from_vector(&cfg, h.as_slice()).unwrap();
        for k in 0..3 {
            *ch.get_mut(k, k) = CMat::zeros(3, 3);
        }
        assert_eq!(back, ch);
        assert!(channels_from_vector(&cfg, &h.as_slice()[1..]).is_err());
    }

    #[test]
    fn probe_solutions_align() {
        let cfg = SystemConfig::symmetric(3, 2, 1);
        let (beams, basis) = probe_draw::<f64>(&cfg, 17, 0).unwrap();
        assert_eq!(basis.ncols(), 18);
        for c in 0..basis.ncols() {
            let col: Vec<Cx<f64>> = basis.column(c).iter().copied().collect();
            let ch = channels_from_vector(&cfg, &col).unwrap();
            assert!(leakage(&ch, &beams).unwrap() < 1e-20);
        }
    }

    #[test]
    fn single_slot_diagonal_never_aligns() {
        let cfg = SystemConfig::diagonal(1, vec![1, 1, 1]);
        let r = run_probe::<f64>(&cfg, 100, 4).unwrap();
        assert_eq!(r.span_rank, 0);
        assert_eq!(r.nontrivial_draws, 0);
        assert!(!r.filled);
    }

    #[test]
    fn generic_probe_fills() {
        let cfg = SystemConfig::symmetric(3, 2, 1);
        let r = run_probe::<f64>(&cfg, 4, 1).unwrap();
        assert_eq!(r.dim_target, 24);
        assert_eq!(r.per_draw_nullity, vec![18; 4]);
        assert_eq!(r.span_rank, 24);
        assert!(r.filled);
        assert_eq!(r.sd_upper_bound, 23);
        assert!(r.span_rank_trajectory.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn zero_draws_rejected() {
        assert!(run_probe::<f64>(&SystemConfig::symmetric(2, 2, 1), 0, 0).is_err());
    }
}
