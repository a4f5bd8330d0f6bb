//! Loan records: CSV parsing and writing, default-rate summaries, and a
//! seeded synthetic generator with planted risk segments.

use std::collections::HashSet;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::month::Month;

/// Column order of the loan CSV.
pub const RECORD_HEADER: [&str; 5] = ["loan_id", "grant_month", "district", "product", "defaulted"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("line {line}: duplicate loan_id {loan_id:?}")]
    DuplicateId { line: u64, loan_id: String },
    #[error("line {line}: {source}")]
    BadMonth {
        line: u64,
        source: crate::month::MonthParseError,
    },
    #[error("invalid synthetic config: {0}")]
    InfeasibleConfig(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoanRecord {
    pub loan_id: String,
    pub grant_month: Month,
    pub district: String,
    pub product: String,
    pub defaulted: bool,
}

/// Reads loan records from CSV with the exact [`RECORD_HEADER`].
pub fn parse_records<R: Read>(reader: R) -> Result<Vec<LoanRecord>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut rows = rdr.records();

    match rows.next() {
        Some(header) => {
            let header = header?;
            if header.iter().ne(RECORD_HEADER.iter().copied()) {
                return Err(IngestError::Malformed {
                    line: 1,
                    message: format!(
                        "expected header {:?}, found {:?}",
                        RECORD_HEADER.join(","),
                        header.iter().collect::<Vec<_>>().join(",")
                    ),
                });
            }
        }
        None => {
            return Err(IngestError::Malformed {
                line: 1,
                message: "missing header".into(),
            })
        }
    }

    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for row in rows {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != RECORD_HEADER.len() {
            return Err(IngestError::Malformed {
                line,
                message: format!(
                    "expected {} fields, found {}",
                    RECORD_HEADER.len(),
                    row.len()
                ),
            });
        }
        let field = |i: usize| -> Result<&str, IngestError> {
            let value = &row[i];
            if value.is_empty() {
                Err(IngestError::Malformed {
                    line,
                    message: format!("empty {}", RECORD_HEADER[i]),
                })
            } else {
                Ok(value)
            }
        };
        let loan_id = field(0)?.to_string();
        let grant_month = field(1)?
            .parse()
            .map_err(|source| IngestError::BadMonth { line, source })?;
        let district = field(2)?.to_string();
        let product = field(3)?.to_string();
        let defaulted = match field(4)? {
            "0" => false,
            "1" => true,
            other => {
                return Err(IngestError::Malformed {
                    line,
                    message: format!("defaulted must be 0 or 1, found {other:?}"),
                })
            }
        };
        if !seen.insert(loan_id.clone()) {
            return Err(IngestError::DuplicateId { line, loan_id });
        }
        records.push(LoanRecord {
            loan_id,
            grant_month,
            district,
            product,
            defaulted,
        });
    }
    Ok(records)
}

pub fn write_records<W: Write>(writer: W, records: &[LoanRecord]) -> Result<(), IngestError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record(RECORD_HEADER)?;
    for r in records {
        let month = r.grant_month.to_string();
        w.write_record([
            r.loan_id.as_str(),
            month.as_str(),
            r.district.as_str(),
            r.product.as_str(),
            if r.defaulted { "1" } else { "0" },
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Selects a subset of records for [`default_rate`]. `None` fields match all.
#[derive(Debug, Clone, Default)]
pub struct RecordFilter<'a> {
    pub district: Option<&'a str>,
    pub product: Option<&'a str>,
    /// Inclusive grant-month range.
    pub months: Option<(Month, Month)>,
}

impl RecordFilter<'_> {
    pub fn matches(&self, r: &LoanRecord) -> bool {
        self.district.is_none_or(|d| r.district == d)
            && self.product.is_none_or(|p| r.product == p)
            && self
                .months
                .is_none_or(|(lo, hi)| lo <= r.grant_month && r.grant_month <= hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DefaultRate {
    pub defaults: usize,
    pub matches: usize,
    /// `defaults / matches`, or 0 when nothing matched.
    pub rate: f64,
    pub empty: bool,
}

pub fn default_rate(records: &[LoanRecord], filter: &RecordFilter<'_>) -> DefaultRate {
    let (matches, defaults) = records
        .iter()
        .filter(|r| filter.matches(r))
        .fold((0usize, 0usize), |(n, d), r| {
            (n + 1, d + r.defaulted as usize)
        });
    DefaultRate {
        defaults,
        matches,
        rate: if matches == 0 {
            0.0
        } else {
            defaults as f64 / matches as f64
        },
        empty: matches == 0,
    }
}

/// A product and/or district whose default probability is multiplied during
/// a range of months.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskySegment {
    #[serde(default)]
    pub product: Option<String>,
    #[serde(default)]
    pub district: Option<String>,
    pub multiplier: f64,
    /// Inclusive month offsets from the start of the span, 0-based.
    pub months: (u32, u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub n_loans: usize,
    pub n_products: usize,
    pub n_districts: usize,
    pub span_months: u32,
    #[serde(default = "SynthConfig::default_start")]
    pub start_month: Month,
    pub base_default_rate: f64,
    #[serde(default)]
    pub risky_segments: Vec<RiskySegment>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_loans: 10_000,
            n_products: 12,
            n_districts: 20,
            span_months: 159,
            start_month: Self::default_start(),
            base_default_rate: 0.1,
            risky_segments: Vec::new(),
            seed: 0,
        }
    }
}

impl SynthConfig {
    fn default_start() -> Month {
        Month::new(2000, 1).expect("valid constant month")
    }

    pub fn product_label(i: usize) -> String {
        format!("P{i:03}")
    }

    pub fn district_label(i: usize) -> String {
        format!("D{i:03}")
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        let fail = |m: String| Err(IngestError::InfeasibleConfig(m));
        if self.n_loans == 0 || self.n_products == 0 || self.n_districts == 0 {
            return fail("n_loans, n_products and n_districts must be positive".into());
        }
        if self.span_months == 0 {
            return fail("span_months must be positive".into());
        }
        let last = self.start_month.offset(self.span_months as i32 - 1);
        if last.year() > crate::month::MAX_YEAR {
            return fail(format!("span ends after {}-12", crate::month::MAX_YEAR));
        }
        if !(0.0..=1.0).contains(&self.base_default_rate) {
            return fail(format!(
                "base_default_rate {} outside [0, 1]",
                self.base_default_rate
            ));
        }
        for (k, s) in self.risky_segments.iter().enumerate() {
            if !s.multiplier.is_finite() || s.multiplier < 0.0 {
                return fail(format!("segment {k}: multiplier must be finite and >= 0"));
            }
            if self.base_default_rate * s.multiplier > 1.0 {
                return fail(format!(
                    "segment {k}: base rate x multiplier = {} exceeds 1",
                    self.base_default_rate * s.multiplier
                ));
            }
            if s.months.0 > s.months.1 || s.months.1 >= self.span_months {
                return fail(format!(
                    "segment {k}: month range {:?} outside span",
                    s.months
                ));
            }
            if s.product.is_none() && s.district.is_none() {
                return fail(format!("segment {k}: needs a product or a district"));
            }
            if let Some(p) = &s.product {
                if !(0..self.n_products).any(|i| &Self::product_label(i) == p) {
                    return fail(format!("segment {k}: unknown product {p:?}"));
                }
            }
            if let Some(d) = &s.district {
                if !(0..self.n_districts).any(|i| &Self::district_label(i) == d) {
                    return fail(format!("segment {k}: unknown district {d:?}"));
                }
            }
        }
        Ok(())
    }

    /// Default probability for a loan in `(product, district)` granted at
    /// month offset `t`. Overlapping segments do not compound: the largest
    /// active multiplier applies.
    pub fn default_probability(&self, product: &str, district: &str, t: u32) -> f64 {
        let multiplier = self
            .risky_segments
            .iter()
            .filter(|s| {
                s.months.0 <= t
                    && t <= s.months.1
                    && s.product.as_deref().is_none_or(|p| p == product)
                    && s.district.as_deref().is_none_or(|d| d == district)
            })
            .map(|s| s.multiplier)
            .fold(None, |acc: Option<f64>, m| {
                Some(acc.map_or(m, |a| a.max(m)))
            });
        self.base_default_rate * multiplier.unwrap_or(1.0)
    }
}

/// Generates loans uniformly over the span and over product x district.
/// Output is sorted by grant month; ids `L000001`, `L000002`, ... follow
/// that order.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Vec<LoanRecord>, IngestError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut draws: Vec<(u32, usize, usize, bool)> = (0..cfg.n_loans)
        .map(|_| {
            let t = rng.gen_range(0..cfg.span_months);
            let p = rng.gen_range(0..cfg.n_products);
            let d = rng.gen_range(0..cfg.n_districts);
            let u: f64 = rng.gen();
            (t, p, d, u)
        })
        .map(|(t, p, d, u)| {
            let prob = cfg.default_probability(
                &SynthConfig::product_label(p),
                &SynthConfig::district_label(d),
                t,
            );
            (t, p, d, u < prob)
        })
        .collect();
    draws.sort_by_key(|&(t, ..)| t);

    Ok(draws
        .into_iter()
        .enumerate()
        .map(|(i, (t, p, d, defaulted))| LoanRecord {
            loan_id: format!("L{:06}", i + 1),
            grant_month: cfg.start_month.offset(t as i32),
            district: SynthConfig::district_label(d),
            product: SynthConfig::product_label(p),
            defaulted,
        })
        .collect())
}
