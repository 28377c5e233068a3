//! Checks a decoder/precoder pair against the zero-forcing conditions
//! `U[j]^H H[j][k] V[k] = 0` (j != k) and the direct-link rank conditions.

use nalgebra::ComplexField;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{condition_number, frobenius_sq, numerical_rank, orthonormal_columns};
use crate::model::{ChannelSet, IaSolution};
use crate::scalar::{CMat, Real};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tolerances<T: Real> {
    /// Absolute threshold on the normalized leakage.
    pub align: T,
    /// Relative singular-value cut for direct-link ranks; `None` uses
    /// `max_dim * eps * sigma_max`.
    pub rank_rtol: Option<T>,
}

impl<T: Real> Default for Tolerances<T> {
    fn default() -> Self {
        Self {
            align: T::lit(1e-8),
            rank_rtol: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerificationResult<T: Real> {
    pub leakage: T,
    /// Largest entry modulus among the cross terms on orthonormalized bases.
    #[serde(rename = "min_cross_residual")]
    pub max_cross_entry: T,
    pub direct_ranks: Vec<usize>,
    pub aligned: bool,
    pub rank_ok: bool,
    pub tolerances: Tolerances<T>,
}

impl<T: Real> VerificationResult<T> {
    pub fn passed(&self) -> bool {
        self.aligned && self.rank_ok
    }
}

fn orthonormal_set<T: Real>(mats: &[CMat<T>], which: &'static str) -> Result<Vec<CMat<T>>> {
    mats.iter()
        .enumerate()
        .map(|(user, m)| {
            orthonormal_columns(m).map_err(|rank| Error::RankDeficient {
                which,
                user,
                rank,
                streams: m.ncols(),
            })
        })
        .collect()
}

struct Bases<T: Real> {
    u: Vec<CMat<T>>,
    v: Vec<CMat<T>>,
}

fn bases<T: Real>(ch: &ChannelSet<T>, sol: &IaSolution<T>) -> Result<Bases<T>> {
    sol.matches_channels(ch)?;
    Ok(Bases {
        u: orthonormal_set(&sol.u, "U")?,
        v: orthonormal_set(&sol.v, "V")?,
    })
}

/// `sum_{j != k} ||Ub[j]^H H[j][k] Vb[k]||_F^2` with `Ub`, `Vb` orthonormal
/// bases of the column spans of `U`, `V`. Zero iff every cross term vanishes.
pub fn leakage<T: Real>(ch: &ChannelSet<T>, sol: &IaSolution<T>) -> Result<T> {
    let b = bases(ch, sol)?;
    Ok(cross_terms(ch, &b).iter().fold(T::zero(), |acc, m| acc + frobenius_sq(m)))
}

fn cross_terms<T: Real>(ch: &ChannelSet<T>, b: &Bases<T>) -> Vec<CMat<T>> {
    let k = ch.users();
    let mut out = Vec::with_capacity(k * k.saturating_sub(1));
    for j in 0..k {
        for l in 0..k {
            if j != l {
                out.push(b.u[j].adjoint() * ch.get(j, l) * &b.v[l]);
            }
        }
    }
    out
}

pub fn check<T: Real>(ch: &ChannelSet<T>, sol: &IaSolution<T>) -> Result<VerificationResult<T>> {
    check_with(ch, sol, Tolerances::default())
}

pub fn check_with<T: Real>(ch: &ChannelSet<T>, sol: &IaSolution<T>, tol: Tolerances<T>) -> Result<VerificationResult<T>> {
    let b = bases(ch, sol)?;
    let terms = cross_terms(ch, &b);
    let leakage = terms.iter().fold(T::zero(), |acc, m| acc + frobenius_sq(m));
    let max_cross_entry = terms
        .iter()
        .flat_map(|m| m.iter())
        .fold(T::zero(), |acc, z| acc.max(z.modulus()));
    let streams = sol.streams();
    let direct_ranks: Vec<usize> = (0..ch.users())
        .map(|k| numerical_rank(&(b.u[k].adjoint() * ch.get(k, k) * &b.v[k]), tol.rank_rtol))
        .collect();
    let rank_ok = direct_ranks.iter().zip(&streams).all(|(r, d)| r == d);
    Ok(VerificationResult {
        leakage,
        max_cross_entry,
        direct_ranks,
        aligned: leakage <= tol.align,
        rank_ok,
        tolerances: tol,
    })
}

/// Largest acceptable condition number of a gauge block.
pub fn gauge_condition_limit<T: Real>() -> T {
    T::one() / (T::lit(1e4) * T::eps())
}

fn gauge_fix<T: Real>(m: &CMat<T>, which: &'static str, user: usize) -> Result<CMat<T>> {
    let d = m.ncols();
    let top = m.rows(0, d).into_owned();
    let cond = condition_number(&top);
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(cond <= gauge_condition_limit::<T>()) {
        return Err(Error::SingularGaugeBlock {
            which,
            user,
            condition: cond.as_f64(),
        });
    }
    let inv = top.try_inverse().ok_or(Error::SingularGaugeBlock {
        which,
        user,
        condition: f64::INFINITY,
    })?;
    let mut out = m * inv;
    // the top block is the identity by construction; store it exactly
    for r in 0..d {
        for c in 0..d {
            out[(r, c)] = if r == c { nalgebra::Complex::new(T::one(), T::zero()) } else { nalgebra::Complex::new(T::zero(), T::zero()) };
        }
    }
    Ok(out)
}

/// Right-multiply every `U[k]`, `V[k]` by the inverse of its top `d_k x d_k`
/// block, so the first `d_k` rows become the identity. The column spans,
/// and therefore the leakage, are unchanged.
pub fn normalize_gauge<T: Real>(sol: &IaSolution<T>) -> Result<IaSolution<T>> {
    let u = sol.u.iter().enumerate().map(|(k, m)| gauge_fix(m, "U", k)).collect::<Result<_>>()?;
    let v = sol.v.iter().enumerate().map(|(k, m)| gauge_fix(m, "V", k)).collect::<Result<_>>()?;
    Ok(IaSolution { u, v })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eye;
    use crate::model::{sample_channels, SystemConfig};
    use crate::rng::substream;
    use nalgebra::Complex;

    #[test]
    fn single_user_has_no_leakage() {
        let cfg = SystemConfig::generic(vec![3], vec![2]);
        let ch = ChannelSet::<f64>::zeros(&cfg);
        let sol = IaSolution::random(&[3], &[2], &mut substream(1, &[0]));
        assert_eq!(leakage(&ch, &sol).unwrap(), 0.0);
    }

    #[test]
    fn identity_case_is_aligned_and_full_rank() {
        let cfg = SystemConfig::generic(vec![3, 2], vec![2, 1]);
        let mut ch = ChannelSet::<f64>::zeros(&cfg);
        *ch.get_mut(0, 0) = eye(3, 3);
        *ch.get_mut(1, 1) = eye(2, 2);
        let sol = IaSolution::new(vec![eye(3, 2), eye(2, 1)], vec![eye(3, 2), eye(2, 1)]).unwrap();
        let r = check(&ch, &sol).unwrap();
        assert!(r.aligned && r.rank_ok, "{r:?}");
        assert_eq!(r.direct_ranks, vec![2, 1]);
    }

    #[test]
    fn rank_deficient_precoder_is_rejected() {
        let cfg = SystemConfig::symmetric(2, 3, 2).with_seed(4);
        let ch: ChannelSet<f64> = sample_channels(&cfg).unwrap();
        let mut sol = IaSolution::random(&cfg.signal_dims, &cfg.streams, &mut substream(2, &[0]));
        sol.v[1].set_column(1, &nalgebra::DVector::zeros(3));
        assert!(matches!(leakage(&ch, &sol), Err(Error::RankDeficient { which: "V", user: 1, .. })));
        assert!(check(&ch, &sol).is_err());
    }

    #[test]
    fn gauge_form_is_a_fixed_point() {
        let sol = IaSolution::<f64>::random(&[3, 3], &[1, 2], &mut substream(9, &[1]));
        let g = normalize_gauge(&sol).unwrap();
        let gg = normalize_gauge(&g).unwrap();
        for (a, b) in g.u.iter().chain(&g.v).zip(gg.u.iter().chain(&gg.v)) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn gauge_scales_single_column_to_unit_lead() {
        let v = CMat::<f64>::from_column_slice(3, 1, &[Complex::new(2.0, -1.0), Complex::new(0.5, 0.5), Complex::new(-3.0, 0.0)]);
        let sol = IaSolution::new(vec![v.clone()], vec![v]).unwrap();
        let g = normalize_gauge(&sol).unwrap();
        assert_eq!(g.v[0][(0, 0)], Complex::new(1.0, 0.0));
        let expected = Complex::new(0.5, 0.5) / Complex::new(2.0, -1.0);
        assert!((g.v[0][(1, 0)] - expected).norm() < 1e-15);
    }

    #[test]
    fn singular_gauge_block_is_reported() {
        let mut v = CMat::<f64>::zeros(3, 1);
        v[(1, 0)] = Complex::new(1.0, 0.0);
        let sol = IaSolution::new(vec![v.clone()], vec![v]).unwrap();
        assert!(matches!(normalize_gauge(&sol), Err(Error::SingularGaugeBlock { .. })));
    }
}
