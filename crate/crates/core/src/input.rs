//! Portfolio input documents.
//!
//! A portfolio is a TOML document with one `[[company]]` table per
//! candidate and one `[[company.scenario]]` table per scenario:
//!
//! ```toml
//! [[company]]
//! name = "A"
//! market_cap = "225B"
//! currency = "USD"
//!
//! [[company.scenario]]
//! label = "Total loss"
//! intrinsic_value = 0
//! probability = 0.05
//! ```
//!
//! Amounts may be TOML numbers or strings with an optional `K`, `M` or `B`
//! magnitude suffix (`"225B"`, `"1.5M"`). Probabilities may be numbers,
//! decimal strings or percentages (`"5%"`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Company, Scenario};

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
enum Number {
    Int(i64),
    Float(f64),
    Text(String),
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct PortfolioDoc {
    #[serde(default)]
    company: Vec<CompanyDoc>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct CompanyDoc {
    name: String,
    market_cap: Number,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    currency: Option<String>,
    #[serde(rename = "scenario", default)]
    scenarios: Vec<ScenarioDoc>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    label: String,
    intrinsic_value: Number,
    probability: Number,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Accept companies whose scenarios are all at or above market cap.
    pub allow_no_downside: bool,
}

/// Converts a decimal literal with an optional K/M/B suffix. The decimal is
/// rescaled textually and rounded to `f64` once.
pub fn parse_amount(text: &str) -> std::result::Result<f64, String> {
    let t = text.trim();
    let (body, shift) = match t.chars().last() {
        Some('K' | 'k') => (&t[..t.len() - 1], 3),
        Some('M' | 'm') => (&t[..t.len() - 1], 6),
        Some('B' | 'b') => (&t[..t.len() - 1], 9),
        _ => (t, 0),
    };
    let body = body.trim_end();
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(i) => (
            &body[..i],
            body[i + 1..]
                .parse::<i32>()
                .map_err(|_| format!("invalid exponent in '{text}'"))?,
        ),
        None => (body, 0),
    };
    let unsigned = mantissa.strip_prefix(['+', '-']).unwrap_or(mantissa);
    let mut parts = unsigned.splitn(2, '.');
    let int = parts.next().unwrap_or("");
    let frac = parts.next().unwrap_or("");
    let digits_ok = |s: &str| s.chars().all(|c| c.is_ascii_digit());
    if (int.is_empty() && frac.is_empty()) || !digits_ok(int) || !digits_ok(frac) {
        return Err(format!("'{text}' is not a decimal number"));
    }
    format!("{mantissa}e{}", exponent + shift)
        .parse::<f64>()
        .map_err(|e| format!("'{text}': {e}"))
}

fn amount(n: &Number, context: &str) -> Result<f64> {
    let v = match n {
        Number::Int(i) => *i as f64,
        Number::Float(f) => *f,
        Number::Text(t) => parse_amount(t).map_err(|e| Error::Parse(format!("{context}: {e}")))?,
    };
    if !v.is_finite() {
        return Err(Error::Parse(format!("{context}: value must be finite")));
    }
    Ok(v)
}

fn probability(n: &Number, context: &str) -> Result<f64> {
    match n {
        Number::Text(t) if t.trim_end().ends_with('%') => {
            let body = t.trim_end().trim_end_matches('%');
            let v = parse_amount(body).map_err(|e| Error::Parse(format!("{context}: {e}")))?;
            format!("{v}e-2")
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("{context}: {e}")))
        }
        Number::Text(t) if t.trim_end().ends_with(['K', 'k', 'M', 'm', 'B', 'b']) => Err(
            Error::Parse(format!("{context}: magnitude suffixes are not allowed here")),
        ),
        _ => amount(n, context),
    }
}

pub fn parse_portfolio(text: &str, options: ParseOptions) -> Result<Vec<Company>> {
    let doc: PortfolioDoc = toml::from_str(text).map_err(|e| Error::Parse(e.to_string().trim_end().to_string()))?;
    if doc.company.is_empty() {
        return Err(Error::Parse(
            "no companies found; expected at least one [[company]] table".into(),
        ));
    }
    doc.company
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let ctx = format!("company {} ('{}')", i + 1, c.name);
            if c.scenarios.is_empty() {
                return Err(Error::Parse(format!(
                    "{ctx}: no [[company.scenario]] tables"
                )));
            }
            let market_cap = amount(&c.market_cap, &format!("{ctx}, field market_cap"))?;
            let scenarios = c
                .scenarios
                .iter()
                .enumerate()
                .map(|(k, s)| {
                    let sctx = format!("{ctx}, scenario {} ('{}')", k + 1, s.label);
                    Scenario::new(
                        s.label.clone(),
                        amount(&s.intrinsic_value, &format!("{sctx}, field intrinsic_value"))?,
                        probability(&s.probability, &format!("{sctx}, field probability"))?,
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let company = if options.allow_no_downside {
                Company::new_allowing_no_downside(c.name.clone(), market_cap, scenarios)?
            } else {
                Company::new(c.name.clone(), market_cap, scenarios)?
            };
            Ok(match &c.currency {
                Some(cur) => company.with_currency(cur.clone()),
                None => company,
            })
        })
        .collect()
}

/// Writes companies back as a portfolio document with full-precision numbers.
pub fn serialize_portfolio(companies: &[Company]) -> String {
    let doc = PortfolioDoc {
        company: companies
            .iter()
            .map(|c| CompanyDoc {
                name: c.name().to_string(),
                market_cap: Number::Float(c.market_cap()),
                currency: c.currency().map(str::to_string),
                scenarios: c
                    .scenarios()
                    .iter()
                    .map(|s| ScenarioDoc {
                        label: s.label().to_string(),
                        intrinsic_value: Number::Float(s.intrinsic_value()),
                        probability: Number::Float(s.probability()),
                    })
                    .collect(),
            })
            .collect(),
    };
    toml::to_string(&doc).expect("portfolio documents always serialize")
}
