//! Plain-text export of the zero-forcing conditions as a polynomial system.
//!
//! The gauge is fixed by setting the first `d_k` rows of every `U[k]`,
//! `V[k]` to the identity, which leaves exactly `N_v` unknowns. Variable
//! `u_k_r_c` stands for `conj(U[k](r, c))` and `v_k_r_c` for `V[k](r, c)`
//! (all indices 1-based), so each equation
//! `sum_{t,r} conj(U[j](t,m)) H[j][k](t,r) V[k](r,n) = 0` is a polynomial
//! of degree at most two in these unknowns.
//!
//! Grammar, one polynomial per line:
//!
//! ```text
//! line   := '#' comment | poly
//! poly   := term ((' + ' | ' - ') term)* | '0'
//! term   := factor ('*' factor)*
//! factor := '(' re ',' im ')' | real | name ('^' power)?
//! ```
//!
//! Coefficients are the channel entries as `(re,im)` pairs printed with the
//! shortest decimal that parses back to the same binary value.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};

use crate::error::{Error, Result};
use crate::model::{ChannelSet, IaSolution, SystemConfig};
use crate::scalar::{Cx, Real};
use crate::verify::normalize_gauge;

pub const FORMAT_TAG: &str = "align-lab polynomial system v1";

#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub coeff: Cx<f64>,
    /// `(variable, power)` pairs, powers at least 1.
    pub factors: Vec<(String, u32)>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Polynomial {
    pub terms: Vec<Term>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolynomialSystem {
    pub header: String,
    pub variables: Vec<String>,
    pub polynomials: Vec<Polynomial>,
}

pub fn decoder_var(user: usize, row: usize, col: usize) -> String {
    format!("u_{}_{}_{}", user + 1, row + 1, col + 1)
}

pub fn precoder_var(user: usize, row: usize, col: usize) -> String {
    format!("v_{}_{}_{}", user + 1, row + 1, col + 1)
}

fn header_line(cfg: &SystemConfig) -> String {
    let list = |xs: &[usize]| xs.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
    let nc = cfg.structure.subcarriers.map_or("-".to_string(), |n| n.to_string());
    format!(
        "{FORMAT_TAG}; K={}; N=[{}]; d=[{}]; structure={:?}; N_c={nc}; seed={}",
        cfg.users,
        list(&cfg.signal_dims),
        list(&cfg.streams),
        cfg.structure.kind,
        cfg.seed
    )
}

/// A factor of `U[k](t, m)`-type entry after gauge fixing.
enum Entry {
    Zero,
    One,
    Var(String),
}

fn gauge_entry(kind: char, user: usize, row: usize, col: usize, streams: usize) -> Entry {
    if row < streams {
        if row == col {
            Entry::One
        } else {
            Entry::Zero
        }
    } else if kind == 'u' {
        Entry::Var(decoder_var(user, row, col))
    } else {
        Entry::Var(precoder_var(user, row, col))
    }
}

/// Build the gauge-fixed system for channels `ch` under `cfg`.
pub fn polynomial_system<T: Real>(cfg: &SystemConfig, ch: &ChannelSet<T>) -> Result<PolynomialSystem> {
    cfg.validate()?;
    ch.conforms_to(cfg)?;
    let mut variables = Vec::new();
    for k in 0..cfg.users {
        let (n, d) = (cfg.signal_dims[k], cfg.streams[k]);
        for r in d..n {
            for c in 0..d {
                variables.push(decoder_var(k, r, c));
            }
        }
        for r in d..n {
            for c in 0..d {
                variables.push(precoder_var(k, r, c));
            }
        }
    }
    let mut polynomials = Vec::new();
    for (j, k) in cfg.cross_pairs() {
        let h = ch.get(j, k);
        let positions = cfg.free_positions(j, k);
        for m in 0..cfg.streams[j] {
            for n in 0..cfg.streams[k] {
                let mut poly = Polynomial::default();
                for &(t, r) in &positions {
                    let u = gauge_entry('u', j, t, m, cfg.streams[j]);
                    let v = gauge_entry('v', k, r, n, cfg.streams[k]);
                    let mut factors = Vec::new();
                    for e in [u, v] {
                        match e {
                            Entry::Zero => {
                                factors.clear();
                                factors.push((String::new(), 0));
                                break;
                            }
                            Entry::One => {}
                            Entry::Var(name) => factors.push((name, 1)),
                        }
                    }
                    if factors.first().is_some_and(|f| f.1 == 0) {
                        continue;
                    }
                    let z = h[(t, r)];
                    poly.terms.push(Term {
                        coeff: Cx::new(z.re.as_f64(), z.im.as_f64()),
                        factors,
                    });
                }
                polynomials.push(poly);
            }
        }
    }
    Ok(PolynomialSystem {
        header: header_line(cfg),
        variables,
        polynomials,
    })
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.coeff.re, self.coeff.im)?;
        for (name, p) in &self.factors {
            if *p == 1 {
                write!(f, "*{name}")?;
            } else {
                write!(f, "*{name}^{p}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

impl PolynomialSystem {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {}", self.header);
        let _ = writeln!(out, "# variables: {}", self.variables.join(" "));
        for p in &self.polynomials {
            let _ = writeln!(out, "{p}");
        }
        out
    }

    /// Parse the text format. Variables are taken from the `# variables:`
    /// line when present, otherwise collected from the terms.
    pub fn parse(text: &str) -> Result<Self> {
        let mut header = String::new();
        let mut variables: Option<Vec<String>> = None;
        let mut seen = BTreeMap::new();
        let mut polynomials = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                let comment = comment.trim();
                if let Some(list) = comment.strip_prefix("variables:") {
                    variables = Some(list.split_whitespace().map(str::to_string).collect());
                } else if header.is_empty() {
                    header = comment.to_string();
                }
                continue;
            }
            let poly = parse_polynomial(line).map_err(|message| Error::Parse { line: idx + 1, message })?;
            for t in &poly.terms {
                for (name, _) in &t.factors {
                    let next = seen.len();
                    seen.entry(name.clone()).or_insert(next);
                }
            }
            polynomials.push(poly);
        }
        let variables = variables.unwrap_or_else(|| {
            let mut v: Vec<(String, usize)> = seen.into_iter().collect();
            v.sort_by_key(|(_, i)| *i);
            v.into_iter().map(|(n, _)| n).collect()
        });
        Ok(Self {
            header,
            variables,
            polynomials,
        })
    }

    /// Evaluate every polynomial at `values`.
    pub fn evaluate(&self, values: &HashMap<String, Cx<f64>>) -> Result<Vec<Cx<f64>>> {
        self.polynomials
            .iter()
            .map(|p| {
                p.terms.iter().try_fold(Cx::new(0.0, 0.0), |acc, t| {
                    let mut prod = t.coeff;
                    for (name, pow) in &t.factors {
                        let x = values
                            .get(name)
                            .ok_or_else(|| Error::InvalidParameter(format!("no value for variable {name}")))?;
                        prod *= x.powu(*pow);
                    }
                    Ok(acc + prod)
                })
            })
            .collect()
    }
}

fn parse_polynomial(line: &str) -> std::result::Result<Polynomial, String> {
    if line == "0" {
        return Ok(Polynomial::default());
    }
    let mut terms = Vec::new();
    let mut sign = 1.0;
    let mut expect_term = true;
    for tok in line.split_whitespace() {
        match (expect_term, tok) {
            (false, "+") => {
                sign = 1.0;
                expect_term = true;
            }
            (false, "-") => {
                sign = -1.0;
                expect_term = true;
            }
            (true, t) => {
                let mut term = parse_term(t)?;
                term.coeff *= sign;
                terms.push(term);
                expect_term = false;
            }
            (false, t) => return Err(format!("expected '+' or '-', found {t:?}")),
        }
    }
    if expect_term {
        return Err("dangling operator".into());
    }
    Ok(Polynomial { terms })
}

fn parse_term(tok: &str) -> std::result::Result<Term, String> {
    let mut coeff = Cx::new(1.0, 0.0);
    let mut factors = Vec::new();
    for factor in tok.split('*') {
        if let Some(inner) = factor.strip_prefix('(').and_then(|s| s.strip_suffix(')')) {
            let (re, im) = inner.split_once(',').ok_or_else(|| format!("bad coefficient {factor:?}"))?;
            let re: f64 = re.trim().parse().map_err(|e| format!("{re:?}: {e}"))?;
            let im: f64 = im.trim().parse().map_err(|e| format!("{im:?}: {e}"))?;
            coeff *= Cx::new(re, im);
        } else if let Ok(x) = factor.parse::<f64>() {
            coeff *= x;
        } else {
            let (name, pow) = match factor.split_once('^') {
                Some((n, p)) => (n, p.parse::<u32>().map_err(|e| format!("{p:?}: {e}"))?),
                None => (factor, 1),
            };
            let valid = !name.is_empty()
                && name.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
                && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
            if !valid {
                return Err(format!("bad variable name {name:?}"));
            }
            if pow > 0 {
                factors.push((name.to_string(), pow));
            }
        }
    }
    Ok(Term { coeff, factors })
}

/// Values of the gauge-fixed unknowns for a solution: the solution is first
/// brought to gauge form, then `u_k_r_c = conj(U[k](r,c))`, `v_k_r_c = V[k](r,c)`.
pub fn gauge_assignment<T: Real>(sol: &IaSolution<T>) -> Result<HashMap<String, Cx<f64>>> {
    let g = normalize_gauge(sol)?;
    let mut out = HashMap::new();
    for k in 0..g.users() {
        let d = g.v[k].ncols();
        for r in d..g.v[k].nrows() {
            for c in 0..d {
                let u = g.u[k][(r, c)];
                let v = g.v[k][(r, c)];
                out.insert(decoder_var(k, r, c), Cx::new(u.re.as_f64(), -u.im.as_f64()));
                out.insert(precoder_var(k, r, c), Cx::new(v.re.as_f64(), v.im.as_f64()));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::sample_channels;

    #[test]
    fn two_user_generic_counts() {
        let cfg = SystemConfig::symmetric(2, 2, 1).with_seed(3);
        let ch: ChannelSet<f64> = sample_channels(&cfg).unwrap();
        let sys = polynomial_system(&cfg, &ch).unwrap();
        assert_eq!(sys.polynomials.len(), 2);
        assert_eq!(sys.variables, vec!["u_1_2_1", "v_1_2_1", "u_2_2_1", "v_2_2_1"]);
        // constant, two linear and one bilinear term
        assert_eq!(sys.polynomials[0].terms.len(), 4);
        assert!(sys.header.contains("K=2") && sys.header.contains("seed=3"));
    }

    #[test]
    fn three_user_generic_counts() {
        let cfg = SystemConfig::symmetric(3, 2, 1).with_seed(1);
        let ch: ChannelSet<f64> = sample_channels(&cfg).unwrap();
        let sys = polynomial_system(&cfg, &ch).unwrap();
        assert_eq!(sys.polynomials.len(), 6);
        assert_eq!(sys.variables.len(), 6);
    }

    #[test]
    fn text_roundtrip_is_exact() {
        let cfg = SystemConfig::diagonal(3, vec![2, 1, 1]).with_seed(8);
        let ch: ChannelSet<f64> = sample_channels(&cfg).unwrap();
        let sys = polynomial_system(&cfg, &ch).unwrap();
        let back = PolynomialSystem::parse(&sys.to_text()).unwrap();
        assert_eq!(back, sys);
    }

    #[test]
    fn parser_accepts_signs_powers_and_reals() {
        let sys = PolynomialSystem::parse("# h\n2*x^2 - (0,1)*y + 3\n0\n").unwrap();
        assert_eq!(sys.variables, vec!["x", "y"]);
        let mut vals = HashMap::new();
        vals.insert("x".to_string(), Cx::new(2.0, 0.0));
        vals.insert("y".to_string(), Cx::new(1.0, 0.0));
        let r = sys.evaluate(&vals).unwrap();
        assert_eq!(r, vec![Cx::new(11.0, -1.0), Cx::new(0.0, 0.0)]);
        assert!(PolynomialSystem::parse("x +").is_err());
        assert!(PolynomialSystem::parse("x y").is_err());
        assert!(PolynomialSystem::parse("(1,)*x").is_err());
        vals.remove("y");
        assert!(sys.evaluate(&vals).is_err());
    }
}
