//! Explicit alignment for three single-antenna users over `2n + 1`
//! diagonal (time or subcarrier) slots, with streams `(n+1, n, n)`.
//!
//! With all channels diagonal, let
//! `T = H31^-1 H32 H12^-1 H13 H23^-1 H21` and `w` a start vector with no
//! zero entries. The precoders are built from the polynomial spaces `K_m = span{w, Tw, ...,
//! T^(m-1) w}`:
//!
//! * `V1` spans `K_(n+1)`,
//! * `V3 = H23^-1 H21 K_n`,
//! * `V2 = H32^-1 H31 T K_n`.
//!
//! Then `H12 V2` and `H13 V3` span the same `n`-dimensional space, and the
//! interference at receivers 2 and 3 falls inside `H21 V1` and `H31 V1`.
//! The conditions hold for any such `w`. We take `w_i = (1 + |t_i|)^-n`,
//! which balances the slot magnitudes of the high powers; with the all-ones
//! vector the direct links are close to rank deficient around `n = 8`.
//! The Krylov bases are produced by Arnoldi rather than raw powers.

use nalgebra::{ComplexField, DVector};
use num_bigint::BigInt;
use num_rational::BigRational;

use crate::error::{Error, Result};
use crate::linalg::{column_basis, frobenius_sq, gram_schmidt, least_left_singular, numerical_rank, orthonormal_columns, project_out};
use crate::model::{sample_channels, ChannelSet, IaSolution, SystemConfig};
use crate::scalar::{CMat, Cx, Real};

/// Relative singular-value cut used to decide whether the interference at
/// a receiver leaves room for the desired streams; raised to `1e3 * eps`
/// in low precision.
const SPAN_RTOL: f64 = 1e-10;

fn span_rtol<T: Real>() -> T {
    T::lit(SPAN_RTOL).max(T::lit(1e3) * T::eps())
}

pub fn cj3_streams(n: usize) -> Vec<usize> {
    vec![n + 1, n, n]
}

/// Diagonal three-user configuration for the construction.
pub fn cj3_config(n: usize, seed: u64) -> Result<SystemConfig> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be a positive integer".into()));
    }
    Ok(SystemConfig::diagonal(2 * n + 1, cj3_streams(n)).with_seed(seed))
}

fn diag<T: Real>(ch: &ChannelSet<T>, rx: usize, tx: usize) -> DVector<Cx<T>> {
    ch.get(rx, tx).diagonal()
}

fn check_input<T: Real>(ch: &ChannelSet<T>, n: usize) -> Result<usize> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be a positive integer".into()));
    }
    let slots = 2 * n + 1;
    if ch.users() != 3 || ch.signal_dims() != vec![slots; 3] {
        return Err(Error::DimensionMismatch(format!(
            "construction needs 3 users with {slots} slots, got dims {:?}",
            ch.signal_dims()
        )));
    }
    let cfg = SystemConfig::diagonal(slots, cj3_streams(n));
    ch.conforms_to(&cfg)?;
    for j in 0..3 {
        for k in 0..3 {
            if j == k {
                continue;
            }
            if let Some(slot) = diag(ch, j, k).iter().position(|z| z.modulus() == T::zero()) {
                return Err(Error::SingularChannel { rx: j, tx: k, slot });
            }
        }
    }
    Ok(slots)
}

/// Start vector proportional to `(1 + |t_i|)^-p`, floored so that no entry
/// underflows to zero.
fn start_vector<T: Real>(t: &DVector<Cx<T>>, p: usize) -> DVector<Cx<T>> {
    let lo = t.iter().map(|z| z.modulus()).fold(T::max_value().unwrap(), |a, b| a.min(b));
    let floor = T::eps().sqrt();
    t.map(|z| {
        let ratio = (T::one() + lo) / (T::one() + z.modulus());
        let e = T::lit(p as f64) * ratio.ln();
        Cx::new(e.exp().max(floor), T::zero())
    })
}

/// Orthonormal Arnoldi basis `[q_0, ..., q_(m-1)]` of `span{w, Tw, ...}`
/// for diagonal `T` given by `t`.
fn krylov_basis<T: Real>(t: &DVector<Cx<T>>, w: &DVector<Cx<T>>, m: usize) -> CMat<T> {
    let len = t.len();
    let mut q = CMat::zeros(len, m);
    if m == 0 {
        return q;
    }
    q.set_column(0, &w.normalize());
    for i in 1..m {
        let z = q.column(i - 1).component_mul(t);
        q.set_column(i, &z);
        let mut head = q.columns(0, i + 1).into_owned();
        gram_schmidt(&mut head);
        q.set_column(i, &head.column(i));
    }
    q
}

/// Build the alignment solution on three-user diagonal channels with
/// `N_s = 2n + 1`.
pub fn construct<T: Real>(ch: &ChannelSet<T>, n: usize) -> Result<IaSolution<T>> {
    let slots = check_input(ch, n)?;
    let h = |j, k| diag(ch, j, k);
    // indices are zero based: user 1 of the recipe is index 0
    let t = h(2, 0)
        .zip_map(&h(2, 1), |a, b| b / a)
        .zip_map(&h(0, 1), |x, c| x / c)
        .component_mul(&h(0, 2))
        .zip_map(&h(1, 2), |x, c| x / c)
        .component_mul(&h(1, 0));
    let w = start_vector(&t, n);
    let basis = krylov_basis(&t, &w, n + 1);
    let head = basis.columns(0, n).into_owned();

    let v1 = basis;
    let d3 = h(1, 0).zip_map(&h(1, 2), |a, b| a / b);
    let d2 = h(2, 0).zip_map(&h(2, 1), |a, b| a / b).component_mul(&t);
    let scale_rows = |d: &DVector<Cx<T>>, m: &CMat<T>| {
        let mut out = m.clone();
        for (r, &s) in d.iter().enumerate() {
            for c in 0..out.ncols() {
                out[(r, c)] *= s;
            }
        }
        out
    };
    let v3 = scale_rows(&d3, &head);
    let v2 = scale_rows(&d2, &head);
    let v: Vec<CMat<T>> = [v1, v2, v3]
        .into_iter()
        .enumerate()
        .map(|(user, m)| {
            orthonormal_columns(&m).map_err(|rank| Error::RankDeficient {
                which: "V",
                user,
                rank,
                streams: m.ncols(),
            })
        })
        .collect::<Result<_>>()?;

    let streams = cj3_streams(n);
    let mut u = Vec::with_capacity(3);
    for k in 0..3 {
        let others: Vec<usize> = (0..3).filter(|&j| j != k).collect();
        let width: usize = others.iter().map(|&j| streams[j]).sum();
        let mut interference = CMat::zeros(slots, width);
        let mut col = 0;
        for &j in &others {
            let block = ch.get(k, j) * &v[j];
            interference.columns_mut(col, block.ncols()).copy_from(&block);
            col += block.ncols();
        }
        let rank = numerical_rank(&interference, Some(span_rtol::<T>()));
        let room = slots - streams[k];
        if rank > room {
            return Err(Error::DegenerateSpan { user: k, rank, room });
        }
        u.push(least_left_singular(&interference, streams[k]));
    }
    IaSolution::new(u, v)
}

/// Subspace residuals of the three alignment conditions, each
/// `||(I - P_B) A||_F^2` on orthonormal bases:
///
/// * (a) `span(H12 V2)` against `span(H13 V3)`, both directions summed,
/// * (b) `span(H23 V3)` inside `span(H21 V1)`,
/// * (c) `span(H32 V2)` inside `span(H31 V1)`.
pub fn span_residuals<T: Real>(ch: &ChannelSet<T>, sol: &IaSolution<T>) -> [T; 3] {
    let img = |rx: usize, tx: usize| column_basis(&(ch.get(rx, tx) * &sol.v[tx]), None);
    let inside = |a: &CMat<T>, b: &CMat<T>| frobenius_sq(&project_out(a, b));
    let (a12, a13) = (img(0, 1), img(0, 2));
    [
        inside(&a12, &a13) + inside(&a13, &a12),
        inside(&img(1, 2), &img(1, 0)),
        inside(&img(2, 1), &img(2, 0)),
    ]
}

/// Channels, configuration and constructed solution for one `(n, seed)`.
#[derive(Clone, Debug)]
pub struct Cj3Instance<T: Real> {
    pub n: usize,
    pub config: SystemConfig,
    pub channels: ChannelSet<T>,
    pub solution: IaSolution<T>,
}

impl<T: Real> Cj3Instance<T> {
    /// Sample diagonal channels from `seed` and construct the solution.
    pub fn generate(n: usize, seed: u64) -> Result<Self> {
        let config = cj3_config(n, seed)?;
        let channels = sample_channels(&config)?;
        let solution = construct(&channels, n)?;
        Ok(Self {
            n,
            config,
            channels,
            solution,
        })
    }

    pub fn from_channels(channels: ChannelSet<T>, n: usize, seed: u64) -> Result<Self> {
        let config = cj3_config(n, seed)?;
        let solution = construct(&channels, n)?;
        Ok(Self {
            n,
            config,
            channels,
            solution,
        })
    }

    /// `(3n + 1) / (3 (2n + 1))`.
    pub fn normalized_dof(&self) -> BigRational {
        cj3_normalized_dof(self.n)
    }

    pub fn exceeds_tdma(&self) -> bool {
        exceeds_tdma(self.n)
    }
}

pub fn cj3_normalized_dof(n: usize) -> BigRational {
    BigRational::new(BigInt::from(3 * n + 1), BigInt::from(3 * (2 * n + 1)))
}

/// Whether the achieved per-user share beats `1/3`.
pub fn exceeds_tdma(n: usize) -> bool {
    cj3_normalized_dof(n) > BigRational::new(BigInt::from(1), BigInt::from(3))
}
