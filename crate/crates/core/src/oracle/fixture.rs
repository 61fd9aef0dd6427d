//! Golden oracle values and the brute-force routine that produces them.
//!
//! The brute-force path evaluates the closed-form alternative CDF on a
//! uniform 1e-6 grid and never touches the quadrature or the scan/bisect
//! root finder, so fixtures stay an independent check on both.
//!
//! File format: one record per line, whitespace-separated `key=value`
//! tokens, the first token naming the record kind. `#` starts a comment.
//!
//! ```text
//! alt_cdf t=0.05 mu_base=3 half_width=0 symmetric=false value=0.85083...
//! tau_star alpha=0.2 r0=0.8 mu_base=3 half_width=0 symmetric=false value=0.0379...
//! limit alpha=0.2 r0=0.847 mu_base=3 half_width=0.5 symmetric=true fdr=0.1694 power=0.78...
//! ```

use super::alt_cdf_closed_form;
use crate::datagen::AlternativeModel;
use crate::error::{Error, Result};
use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::path::Path;

pub const GRID_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum Fixture {
    AltCdf {
        t: f64,
        alt: AlternativeModel,
        value: f64,
    },
    TauStar {
        alpha: f64,
        r0: f64,
        alt: AlternativeModel,
        value: f64,
    },
    Limit {
        alpha: f64,
        r0: f64,
        alt: AlternativeModel,
        fdr: f64,
        power: f64,
    },
}

fn alt_tokens(alt: &AlternativeModel) -> String {
    format!(
        "mu_base={:?} half_width={:?} symmetric={}",
        alt.mu_base, alt.half_width, alt.symmetric
    )
}

impl fmt::Display for Fixture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fixture::AltCdf { t, alt, value } => {
                write!(f, "alt_cdf t={t:?} {} value={value:?}", alt_tokens(alt))
            }
            Fixture::TauStar {
                alpha,
                r0,
                alt,
                value,
            } => write!(
                f,
                "tau_star alpha={alpha:?} r0={r0:?} {} value={value:?}",
                alt_tokens(alt)
            ),
            Fixture::Limit {
                alpha,
                r0,
                alt,
                fdr,
                power,
            } => write!(
                f,
                "limit alpha={alpha:?} r0={r0:?} {} fdr={fdr:?} power={power:?}",
                alt_tokens(alt)
            ),
        }
    }
}

impl Fixture {
    pub fn parse(line: &str) -> Result<Self> {
        let mut tokens = line.split_whitespace();
        let kind = tokens.next().ok_or_else(|| Error::input("empty fixture record"))?;
        let mut fields = HashMap::new();
        for tok in tokens {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| Error::input(format!("malformed fixture token `{tok}`")))?;
            fields.insert(k, v);
        }
        let num = |key: &str| -> Result<f64> {
            fields
                .get(key)
                .ok_or_else(|| Error::input(format!("fixture `{kind}` lacks `{key}`")))?
                .parse::<f64>()
                .map_err(|e| Error::input(format!("fixture field `{key}`: {e}")))
        };
        let symmetric = match fields.get("symmetric").copied() {
            Some("true") => true,
            Some("false") => false,
            other => return Err(Error::input(format!("bad `symmetric` value {other:?}"))),
        };
        let alt = AlternativeModel::new(num("mu_base")?, num("half_width")?, symmetric)?;
        match kind {
            "alt_cdf" => Ok(Fixture::AltCdf {
                t: num("t")?,
                alt,
                value: num("value")?,
            }),
            "tau_star" => Ok(Fixture::TauStar {
                alpha: num("alpha")?,
                r0: num("r0")?,
                alt,
                value: num("value")?,
            }),
            "limit" => Ok(Fixture::Limit {
                alpha: num("alpha")?,
                r0: num("r0")?,
                alt,
                fdr: num("fdr")?,
                power: num("power")?,
            }),
            other => Err(Error::input(format!("unknown fixture kind `{other}`"))),
        }
    }
}

pub fn parse_fixtures(text: &str) -> Result<Vec<Fixture>> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(Fixture::parse)
        .collect()
}

pub fn render_fixtures(fixtures: &[Fixture]) -> String {
    let mut out = String::from("# Golden oracle values: closed-form F(t) on a 1e-6 grid.\n");
    for f in fixtures {
        let _ = writeln!(out, "{f}");
    }
    out
}

pub fn write_fixtures(path: &Path, fixtures: &[Fixture]) -> Result<()> {
    std::fs::write(path, render_fixtures(fixtures))?;
    Ok(())
}

/// Largest root of `F(t) = beta t` by exhaustive evaluation on the grid
/// `k * step`, refined by linear interpolation inside the last cell where
/// `F - beta t` changes sign from nonnegative to negative.
pub fn brute_force_tau<F: Fn(f64) -> f64>(cdf: F, beta: f64, step: f64) -> f64 {
    let upper = 1.0 / beta;
    let cells = (upper / step).floor() as usize;
    let mut last: Option<(f64, f64, f64, f64)> = None;
    let mut prev = (0.0, 0.0);
    for k in 1..=cells {
        let t = k as f64 * step;
        let d = cdf(t) - beta * t;
        if prev.1 >= 0.0 && d < 0.0 && k > 1 {
            last = Some((prev.0, prev.1, t, d));
        }
        prev = (t, d);
    }
    if prev.1 >= 0.0 {
        // Still on or above the line at the last grid point.
        return prev.0;
    }
    match last {
        Some((t0, d0, _, d1)) => t0 + step * d0 / (d0 - d1),
        None => 0.0,
    }
}

fn closed(alt: AlternativeModel) -> impl Fn(f64) -> f64 {
    move |t| alt_cdf_closed_form(&alt, t).expect("grid point inside [0, 1]")
}

pub fn brute_force_tau_star(alpha: f64, r0: f64, alt: &AlternativeModel) -> Result<f64> {
    let beta = super::beta(alpha, r0)?;
    Ok(brute_force_tau(closed(*alt), beta, GRID_STEP))
}

/// Brute-force `(fdr, power)` limits of pooled BH for one population.
pub fn brute_force_limit(alpha: f64, r0: f64, alt: &AlternativeModel) -> Result<(f64, f64)> {
    let tau = brute_force_tau_star(alpha, r0, alt)?;
    if tau == 0.0 {
        return Ok((0.0, 0.0));
    }
    let f = alt_cdf_closed_form(alt, tau)?;
    Ok((r0 * tau / (r0 * tau + (1.0 - r0) * f), f))
}

/// The fixture set shipped with the crate.
pub fn golden_fixtures() -> Result<Vec<Fixture>> {
    let point3 = AlternativeModel::fixed(3.0)?;
    let sym3 = AlternativeModel::symmetric(3.0)?;
    let sym2 = AlternativeModel::symmetric(2.0)?;
    let mut out = Vec::new();
    for (alt, t) in [(point3, 0.05), (point3, 0.5), (sym3, 0.05), (sym3, 0.5), (sym2, 0.01)] {
        out.push(Fixture::AltCdf {
            t,
            alt,
            value: alt_cdf_closed_form(&alt, t)?,
        });
    }
    // r0 = 0.847 is the network null share of the default experiment layout
    // (r1_i = 0.3 i / 50 averaged over 50 equal nodes).
    for (alpha, r0, alt) in [(0.2, 0.8, point3), (0.2, 0.847, sym3), (0.2, 0.5, sym2), (0.05, 0.9, sym3)] {
        out.push(Fixture::TauStar {
            alpha,
            r0,
            alt,
            value: brute_force_tau_star(alpha, r0, &alt)?,
        });
    }
    for (alpha, r0, alt) in [(0.2, 0.847, sym3), (0.2, 0.8, point3)] {
        let (fdr, power) = brute_force_limit(alpha, r0, &alt)?;
        out.push(Fixture::Limit {
            alpha,
            r0,
            alt,
            fdr,
            power,
        });
    }
    Ok(out)
}
