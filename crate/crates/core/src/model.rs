//! System configurations, channel sets and precoder/decoder pairs.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::rng::{substream, DOMAIN_CHANNEL};
use crate::scalar::{CMat, Cx, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StructureKind {
    /// Dense MIMO matrices.
    Generic,
    /// Time or subcarrier extension with a single antenna.
    Diagonal,
    /// MIMO-OFDM: `N_c` blocks of size `M_j x M_k`.
    BlockDiagonal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChannelStructure {
    pub kind: StructureKind,
    /// Subcarrier count, only meaningful for [`StructureKind::BlockDiagonal`].
    #[serde(rename = "N_c", default, skip_serializing_if = "Option::is_none")]
    pub subcarriers: Option<usize>,
}

impl ChannelStructure {
    pub const GENERIC: Self = Self {
        kind: StructureKind::Generic,
        subcarriers: None,
    };
    pub const DIAGONAL: Self = Self {
        kind: StructureKind::Diagonal,
        subcarriers: None,
    };

    pub fn block_diagonal(subcarriers: usize) -> Self {
        Self {
            kind: StructureKind::BlockDiagonal,
            subcarriers: Some(subcarriers),
        }
    }
}

/// A K-user interference channel instance.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SystemConfig {
    #[serde(rename = "K")]
    pub users: usize,
    /// Signal dimension per user.
    #[serde(rename = "N")]
    pub signal_dims: Vec<usize>,
    /// Stream count per user.
    #[serde(rename = "d")]
    pub streams: Vec<usize>,
    /// Antenna count per user (block-diagonal only).
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub antennas: Option<Vec<usize>>,
    pub structure: ChannelStructure,
    #[serde(default)]
    pub seed: u64,
}

impl SystemConfig {
    pub fn generic(signal_dims: Vec<usize>, streams: Vec<usize>) -> Self {
        Self {
            users: signal_dims.len(),
            signal_dims,
            streams,
            antennas: None,
            structure: ChannelStructure::GENERIC,
            seed: 0,
        }
    }

    /// Symmetric MIMO: every user has `antennas` antennas and `streams` streams.
    pub fn symmetric(users: usize, antennas: usize, streams: usize) -> Self {
        Self::generic(vec![antennas; users], vec![streams; users])
    }

    pub fn diagonal(slots: usize, streams: Vec<usize>) -> Self {
        Self {
            users: streams.len(),
            signal_dims: vec![slots; streams.len()],
            streams,
            antennas: None,
            structure: ChannelStructure::DIAGONAL,
            seed: 0,
        }
    }

    pub fn block_diagonal(antennas: Vec<usize>, subcarriers: usize, streams: Vec<usize>) -> Self {
        Self {
            users: antennas.len(),
            signal_dims: antennas.iter().map(|m| m * subcarriers).collect(),
            streams,
            antennas: Some(antennas),
            structure: ChannelStructure::block_diagonal(subcarriers),
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Check every configuration invariant, naming the first violated one.
    pub fn validate(&self) -> Result<()> {
        let k = self.users;
        if k < 2 {
            return Err(Error::InvalidConfig(format!("K = {k}, need at least 2 users")));
        }
        if self.signal_dims.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "N has {} entries for K = {k}",
                self.signal_dims.len()
            )));
        }
        if self.streams.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "d has {} entries for K = {k}",
                self.streams.len()
            )));
        }
        for (user, (&n, &d)) in self.signal_dims.iter().zip(&self.streams).enumerate() {
            if n == 0 {
                return Err(Error::InvalidConfig(format!("N[{user}] = 0")));
            }
            if d == 0 {
                return Err(Error::InvalidConfig(format!("d[{user}] = 0, need at least one stream")));
            }
            if d > n {
                return Err(Error::StreamOverflow {
                    user,
                    streams: d,
                    dim: n,
                });
            }
        }
        match self.structure.kind {
            StructureKind::Generic => {}
            StructureKind::Diagonal => {
                let ns = self.signal_dims[0];
                if let Some(user) = self.signal_dims.iter().position(|&n| n != ns) {
                    return Err(Error::DimensionMismatch(format!(
                        "diagonal channels need a common signal dimension, N[{user}] = {} != {ns}",
                        self.signal_dims[user]
                    )));
                }
            }
            StructureKind::BlockDiagonal => {
                let nc = self.structure.subcarriers.unwrap_or(0);
                if nc == 0 {
                    return Err(Error::InvalidConfig("block-diagonal structure needs N_c >= 1".into()));
                }
                let m = self.antennas.as_ref().ok_or_else(|| {
                    Error::DimensionMismatch("block-diagonal structure needs antenna counts M".into())
                })?;
                if m.len() != k {
                    return Err(Error::DimensionMismatch(format!("M has {} entries for K = {k}", m.len())));
                }
                for (user, (&mk, &nk)) in m.iter().zip(&self.signal_dims).enumerate() {
                    if mk * nc != nk {
                        return Err(Error::DimensionMismatch(format!(
                            "N[{user}] = {nk} but M[{user}] * N_c = {mk} * {nc}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn antennas_or_dims(&self) -> &[usize] {
        self.antennas.as_deref().unwrap_or(&self.signal_dims)
    }

    /// Positions `(row, col)` of `H[rx][tx]` that are not confined to zero,
    /// in the order used by channel vectors and probe matrices.
    pub fn free_positions(&self, rx: usize, tx: usize) -> Vec<(usize, usize)> {
        let (nr, nt) = (self.signal_dims[rx], self.signal_dims[tx]);
        match self.structure.kind {
            StructureKind::Generic => (0..nr).flat_map(|r| (0..nt).map(move |c| (r, c))).collect(),
            StructureKind::Diagonal => (0..nr.min(nt)).map(|t| (t, t)).collect(),
            StructureKind::BlockDiagonal => {
                let nc = self.structure.subcarriers.unwrap_or(1);
                let m = self.antennas_or_dims();
                let (mr, mt) = (m[rx], m[tx]);
                let mut out = Vec::with_capacity(nc * mr * mt);
                for b in 0..nc {
                    for a in 0..mr {
                        for c in 0..mt {
                            out.push((b * mr + a, b * mt + c));
                        }
                    }
                }
                out
            }
        }
    }

    /// Number of free entries in one matrix `H[rx][tx]`.
    pub fn free_entries_in(&self, rx: usize, tx: usize) -> usize {
        let (nr, nt) = (self.signal_dims[rx], self.signal_dims[tx]);
        match self.structure.kind {
            StructureKind::Generic => nr * nt,
            StructureKind::Diagonal => nr.min(nt),
            StructureKind::BlockDiagonal => {
                let m = self.antennas_or_dims();
                self.structure.subcarriers.unwrap_or(1) * m[rx] * m[tx]
            }
        }
    }

    /// Free channel entries over ordered cross pairs (and direct links when
    /// `include_direct`).
    pub fn free_entry_count(&self, include_direct: bool) -> usize {
        let k = self.users;
        (0..k)
            .flat_map(|j| (0..k).map(move |l| (j, l)))
            .filter(|&(j, l)| include_direct || j != l)
            .map(|(j, l)| self.free_entries_in(j, l))
            .sum()
    }

    /// Ordered cross pairs `(rx, tx)`, `rx != tx`, rx-major.
    pub fn cross_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let k = self.users;
        (0..k).flat_map(move |j| (0..k).filter(move |&l| l != j).map(move |l| (j, l)))
    }
}

/// Free-standing form of [`SystemConfig::validate`].
pub fn validate_config(cfg: &SystemConfig) -> Result<()> {
    cfg.validate()
}

/// Circularly-symmetric complex standard normal sample.
pub(crate) fn complex_normal<T: Real, R: Rng + ?Sized>(rng: &mut R) -> Cx<T> {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Cx::new(T::lit(re * s), T::lit(im * s))
}

pub(crate) fn complex_normal_matrix<T: Real, R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat<T> {
    // column-major fill order
    CMat::from_fn(rows, cols, |_, _| complex_normal(rng))
}

/// All `K x K` channel matrices `H[rx][tx]`, including the direct links.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSet<T: Real> {
    users: usize,
    mats: Vec<CMat<T>>,
}

impl<T: Real> ChannelSet<T> {
    /// Build from `K * K` matrices in rx-major order; `H[j][k]` must be
    /// `N_j x N_k` where `N_j` is read off the direct link `H[j][j]`.
    pub fn from_matrices(mats: Vec<CMat<T>>) -> Result<Self> {
        let users = (mats.len() as f64).sqrt().round() as usize;
        if users * users != mats.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} channel matrices is not a square number",
                mats.len()
            )));
        }
        let dims: Vec<usize> = (0..users).map(|j| mats[j * users + j].nrows()).collect();
        for j in 0..users {
            for k in 0..users {
                let h = &mats[j * users + k];
                if h.shape() != (dims[j], dims[k]) {
                    return Err(Error::DimensionMismatch(format!(
                        "H[{j}][{k}] is {}x{}, expected {}x{}",
                        h.nrows(),
                        h.ncols(),
                        dims[j],
                        dims[k]
                    )));
                }
            }
        }
        Ok(Self { users, mats })
    }

    /// All-zero channels for `cfg`.
    pub fn zeros(cfg: &SystemConfig) -> Self {
        let k = cfg.users;
        let mats = (0..k * k)
            .map(|i| CMat::zeros(cfg.signal_dims[i / k], cfg.signal_dims[i % k]))
            .collect();
        Self { users: k, mats }
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn signal_dims(&self) -> Vec<usize> {
        (0..self.users).map(|j| self.get(j, j).nrows()).collect()
    }

    /// `H[rx][tx]`: channel from transmitter `tx` to receiver `rx`.
    pub fn get(&self, rx: usize, tx: usize) -> &CMat<T> {
        &self.mats[rx * self.users + tx]
    }

    pub fn get_mut(&mut self, rx: usize, tx: usize) -> &mut CMat<T> {
        &mut self.mats[rx * self.users + tx]
    }

    pub fn matrices(&self) -> &[CMat<T>] {
        &self.mats
    }

    /// Check dimensions and that every entry outside the free pattern of
    /// `cfg.structure` is exactly zero.
    pub fn conforms_to(&self, cfg: &SystemConfig) -> Result<()> {
        if self.users != cfg.users || self.signal_dims() != cfg.signal_dims {
            return Err(Error::DimensionMismatch(format!(
                "channels have dims {:?}, config has {:?}",
                self.signal_dims(),
                cfg.signal_dims
            )));
        }
        for j in 0..self.users {
            for k in 0..self.users {
                let h = self.get(j, k);
                let mut mask = nalgebra::DMatrix::from_element(h.nrows(), h.ncols(), false);
                for (r, c) in cfg.free_positions(j, k) {
                    mask[(r, c)] = true;
                }
                for r in 0..h.nrows() {
                    for c in 0..h.ncols() {
                        let z = h[(r, c)];
                        if !(z.re.is_finite() && z.im.is_finite()) {
                            return Err(Error::InvalidConfig(format!("H[{j}][{k}]({r},{c}) is not finite")));
                        }
                        if !mask[(r, c)] && z != Cx::new(T::zero(), T::zero()) {
                            return Err(Error::DimensionMismatch(format!(
                                "H[{j}][{k}]({r},{c}) must be zero under {:?}",
                                cfg.structure.kind
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Load from the dense JSON wire format and check it against `cfg`.
    pub fn from_json_for(json: &str, cfg: &SystemConfig) -> Result<Self> {
        let ch: Self = serde_json::from_str(json)?;
        ch.conforms_to(cfg)?;
        Ok(ch)
    }
}

/// Draw generic channels for `cfg`.
///
/// Each ordered pair `(rx, tx)` reads its own ChaCha20 substream keyed by
/// `cfg.seed`, so the result does not depend on iteration order and the
/// same seed always yields bit-identical matrices.
pub fn sample_channels<T: Real>(cfg: &SystemConfig) -> Result<ChannelSet<T>> {
    cfg.validate()?;
    let mut ch = ChannelSet::zeros(cfg);
    let k = cfg.users;
    for j in 0..k {
        for l in 0..k {
            let mut rng = substream(cfg.seed, &[DOMAIN_CHANNEL, j as u64, l as u64]);
            let h = ch.get_mut(j, l);
            for (r, c) in cfg.free_positions(j, l) {
                h[(r, c)] = complex_normal(&mut rng);
            }
        }
    }
    Ok(ch)
}

/// Decoders `U[k]` and precoders `V[k]`, both `N_k x d_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct IaSolution<T: Real> {
    pub u: Vec<CMat<T>>,
    pub v: Vec<CMat<T>>,
}

impl<T: Real> IaSolution<T> {
    pub fn new(u: Vec<CMat<T>>, v: Vec<CMat<T>>) -> Result<Self> {
        if u.len() != v.len() {
            return Err(Error::DimensionMismatch(format!("{} decoders but {} precoders", u.len(), v.len())));
        }
        for (k, (uk, vk)) in u.iter().zip(&v).enumerate() {
            if uk.shape() != vk.shape() {
                return Err(Error::DimensionMismatch(format!(
                    "U[{k}] is {:?} but V[{k}] is {:?}",
                    uk.shape(),
                    vk.shape()
                )));
            }
        }
        Ok(Self { u, v })
    }

    pub fn users(&self) -> usize {
        self.u.len()
    }

    pub fn streams(&self) -> Vec<usize> {
        self.v.iter().map(|m| m.ncols()).collect()
    }

    pub fn signal_dims(&self) -> Vec<usize> {
        self.v.iter().map(|m| m.nrows()).collect()
    }

    /// Independent complex-normal entries for every `U[k]`, `V[k]`.
    pub fn random<R: Rng + ?Sized>(signal_dims: &[usize], streams: &[usize], rng: &mut R) -> Self {
        let u = signal_dims
            .iter()
            .zip(streams)
            .map(|(&n, &d)| complex_normal_matrix(rng, n, d))
            .collect();
        let v = signal_dims
            .iter()
            .zip(streams)
            .map(|(&n, &d)| complex_normal_matrix(rng, n, d))
            .collect();
        Self { u, v }
    }

    /// Check shapes against a configuration.
    pub fn matches(&self, cfg: &SystemConfig) -> Result<()> {
        if self.users() != cfg.users || self.signal_dims() != cfg.signal_dims || self.streams() != cfg.streams {
            return Err(Error::DimensionMismatch(format!(
                "solution has N = {:?}, d = {:?}; config has N = {:?}, d = {:?}",
                self.signal_dims(),
                self.streams(),
                cfg.signal_dims,
                cfg.streams
            )));
        }
        Ok(())
    }

    /// Check shapes against a channel set.
    pub fn matches_channels(&self, ch: &ChannelSet<T>) -> Result<()> {
        if self.users() != ch.users() || self.signal_dims() != ch.signal_dims() {
            return Err(Error::DimensionMismatch(format!(
                "solution has N = {:?}, channels have {:?}",
                self.signal_dims(),
                ch.signal_dims()
            )));
        }
        Ok(())
    }

    pub fn cast<S: Real>(&self) -> IaSolution<S> {
        IaSolution {
            u: self.u.iter().map(cast_matrix).collect(),
            v: self.v.iter().map(cast_matrix).collect(),
        }
    }
}

pub(crate) fn cast_matrix<T: Real, S: Real>(m: &CMat<T>) -> CMat<S> {
    m.map(|z| Cx::new(S::lit(z.re.as_f64()), S::lit(z.im.as_f64())))
}

// Wire format: dense row-major matrices of [re, im] pairs.
type WireMatrix = Vec<Vec<[f64; 2]>>;

fn to_wire<T: Real>(m: &CMat<T>) -> WireMatrix {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re.as_f64(), m[(r, c)].im.as_f64()]).collect())
        .collect()
}

fn from_wire<T: Real>(w: &WireMatrix) -> std::result::Result<CMat<T>, String> {
    let rows = w.len();
    let cols = w.first().map_or(0, Vec::len);
    if w.iter().any(|r| r.len() != cols) {
        return Err("ragged matrix rows".into());
    }
    Ok(CMat::from_fn(rows, cols, |r, c| Cx::new(T::lit(w[r][c][0]), T::lit(w[r][c][1]))))
}

impl<T: Real> Serialize for ChannelSet<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let wire: Vec<WireMatrix> = self.mats.iter().map(to_wire).collect();
        wire.serialize(s)
    }
}

impl<'de, T: Real> Deserialize<'de> for ChannelSet<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire: Vec<WireMatrix> = Vec::deserialize(d)?;
        let mats = wire.iter().map(from_wire).collect::<std::result::Result<Vec<_>, _>>().map_err(D::Error::custom)?;
        ChannelSet::from_matrices(mats).map_err(D::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
struct WireSolution {
    #[serde(rename = "U")]
    u: Vec<WireMatrix>,
    #[serde(rename = "V")]
    v: Vec<WireMatrix>,
}

impl<T: Real> Serialize for IaSolution<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        WireSolution {
            u: self.u.iter().map(to_wire).collect(),
            v: self.v.iter().map(to_wire).collect(),
        }
        .serialize(s)
    }
}

impl<'de, T: Real> Deserialize<'de> for IaSolution<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let w = WireSolution::deserialize(d)?;
        let conv = |ms: &[WireMatrix]| ms.iter().map(from_wire).collect::<std::result::Result<Vec<_>, _>>();
        let u = conv(&w.u).map_err(D::Error::custom)?;
        let v = conv(&w.v).map_err(D::Error::custom)?;
        IaSolution::new(u, v).map_err(D::Error::custom)
    }
}
