//! CDS spread panels: ingestion, intensity extraction and yearly empirical
//! Kendall taus.
//!
//! Input files are plain CSV with a `date,<entity>,...` header, ISO-8601
//! dates and 5-year CDS spreads in basis points. Default intensities come
//! from the credit-triangle approximation `lambda = spread / LGD` (flat
//! hazard, flat rate, so the rate cancels and is kept as metadata only), and
//! empirical taus are computed per calendar year on intensity levels (or
//! first differences, which rank statistics make an explicitly different
//! choice).

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use chrono::{Datelike, NaiveDate};

use crate::calibration::TauMatrix;
use crate::error::{Error, Result};
use crate::montecarlo::empirical_tau;

/// Minimum surviving observations required in a calendar year.
pub const MIN_YEAR_OBSERVATIONS: usize = 30;

/// A cleaned panel of CDS spreads in basis points.
#[derive(Debug, Clone, PartialEq)]
pub struct SpreadPanel {
    dates: Vec<NaiveDate>,
    entities: Vec<String>,
    /// Row-major `dates x entities`.
    spreads: Vec<f64>,
}

/// What the cleaning pass dropped.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CleaningReport {
    pub rows_kept: usize,
    pub rows_dropped: usize,
    /// 1-based file line numbers of dropped rows (data issues only).
    pub dropped_lines: Vec<usize>,
}

impl CleaningReport {
    /// One-line human summary for logs.
    pub fn summary(&self) -> String {
        let mut s = format!(
            "kept {} rows, dropped {} incomplete/non-positive rows",
            self.rows_kept, self.rows_dropped
        );
        if !self.dropped_lines.is_empty() {
            let shown: Vec<String> = self
                .dropped_lines
                .iter()
                .take(10)
                .map(|l| l.to_string())
                .collect();
            let _ = write!(s, " (lines {}{})", shown.join(", "), {
                if self.dropped_lines.len() > 10 {
                    ", ..."
                } else {
                    ""
                }
            });
        }
        s
    }
}

impl SpreadPanel {
    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn entities(&self) -> &[String] {
        &self.entities
    }

    pub fn n_rows(&self) -> usize {
        self.dates.len()
    }

    /// Spread (bp) at `row` for entity column `j` (0-based).
    pub fn spread(&self, row: usize, j: usize) -> f64 {
        self.spreads[row * self.entities.len() + j]
    }

    /// Builds a panel in memory; rows must be strictly increasing in date.
    pub fn from_rows(entities: Vec<String>, rows: Vec<(NaiveDate, Vec<f64>)>) -> Result<Self> {
        let mut dates = Vec::with_capacity(rows.len());
        let mut spreads = Vec::with_capacity(rows.len() * entities.len());
        for (date, cells) in rows {
            if cells.len() != entities.len() {
                return Err(Error::Usage(format!(
                    "row {date} has {} cells for {} entities",
                    cells.len(),
                    entities.len()
                )));
            }
            if let Some(last) = dates.last() {
                if *last >= date {
                    return Err(Error::Validation(format!(
                        "dates must be strictly increasing, {date} follows {last}"
                    )));
                }
            }
            dates.push(date);
            spreads.extend_from_slice(&cells);
        }
        Ok(Self {
            dates,
            entities,
            spreads,
        })
    }

    /// Serializes back to the input CSV format at full float precision, so a
    /// reload reproduces the panel exactly.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "date,{}", self.entities.join(","))?;
        for (row, date) in self.dates.iter().enumerate() {
            let cells: Vec<String> = (0..self.entities.len())
                .map(|j| format!("{}", self.spread(row, j)))
                .collect();
            writeln!(w, "{},{}", date.format("%Y-%m-%d"), cells.join(","))?;
        }
        Ok(())
    }
}

/// Loads and cleans a spread panel from `path`. Rows with any missing,
/// non-numeric-but-empty or non-positive cell are dropped and counted;
/// malformed structure (bad header, bad date, bad number, wrong cell count)
/// is a parse error carrying the 1-based line number.
pub fn load_spreads<P: AsRef<Path>>(path: P) -> Result<(SpreadPanel, CleaningReport)> {
    let file = std::fs::File::open(path.as_ref())?;
    parse_spreads(BufReader::new(file))
}

/// Same as [`load_spreads`] for any reader.
pub fn parse_spreads<R: Read>(reader: R) -> Result<(SpreadPanel, CleaningReport)> {
    let mut lines = BufReader::new(reader).lines();
    let header = match lines.next() {
        Some(h) => h?,
        None => {
            return Err(Error::Parse {
                line: 1,
                msg: "empty file".into(),
            })
        }
    };
    let cols: Vec<&str> = header.trim_end().split(',').collect();
    if cols.len() < 2 || !cols[0].trim().eq_ignore_ascii_case("date") {
        return Err(Error::Parse {
            line: 1,
            msg: format!("header must be 'date,<entity>,...', got '{header}'"),
        });
    }
    let entities: Vec<String> = cols[1..].iter().map(|c| c.trim().to_string()).collect();
    if entities.iter().any(|e| e.is_empty()) {
        return Err(Error::Parse {
            line: 1,
            msg: "empty entity name in header".into(),
        });
    }

    let mut dates = Vec::new();
    let mut spreads = Vec::new();
    let mut report = CleaningReport::default();
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let line = line?;
        let trimmed = line.trim_end();
        if trimmed.is_empty() {
            continue;
        }
        let cells: Vec<&str> = trimmed.split(',').collect();
        if cells.len() != entities.len() + 1 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected {} cells, got {}", entities.len() + 1, cells.len()),
            });
        }
        let date =
            NaiveDate::parse_from_str(cells[0].trim(), "%Y-%m-%d").map_err(|e| Error::Parse {
                line: line_no,
                msg: format!("bad date '{}': {e}", cells[0]),
            })?;
        if let Some(last) = dates.last() {
            if *last >= date {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("dates must be strictly increasing, got {date} after {last}"),
                });
            }
        }
        let mut row = Vec::with_capacity(entities.len());
        let mut clean = true;
        for cell in &cells[1..] {
            let cell = cell.trim();
            if cell.is_empty() {
                clean = false;
                break;
            }
            let v: f64 = cell.parse().map_err(|e| Error::Parse {
                line: line_no,
                msg: format!("bad number '{cell}': {e}"),
            })?;
            if !(v > 0.0) || !v.is_finite() {
                clean = false;
                break;
            }
            row.push(v);
        }
        if clean {
            dates.push(date);
            spreads.extend_from_slice(&row);
            report.rows_kept += 1;
        } else {
            report.rows_dropped += 1;
            report.dropped_lines.push(line_no);
        }
    }
    Ok((
        SpreadPanel {
            dates,
            entities,
            spreads,
        },
        report,
    ))
}

/// Panel of per-entity default intensities (per annum) extracted from
/// spreads.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityPanel {
    dates: Vec<NaiveDate>,
    entities: Vec<String>,
    intensities: Vec<f64>,
    pub lgd: f64,
    /// Flat annualized rate, metadata only: it cancels in the flat-hazard
    /// credit-triangle extraction.
    pub rate: f64,
}

impl IntensityPanel {
    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn entities(&self) -> &[String] {
        &self.entities
    }

    pub fn intensity(&self, row: usize, j: usize) -> f64 {
        self.intensities[row * self.entities.len() + j]
    }

    /// Intensity series of entity column `j` restricted to `year`.
    pub fn year_column(&self, j: usize, year: i32) -> Vec<f64> {
        self.dates
            .iter()
            .enumerate()
            .filter(|(_, d)| d.year() == year)
            .map(|(row, _)| self.intensity(row, j))
            .collect()
    }

    /// Years present in the panel, ascending without duplicates.
    pub fn years(&self) -> Vec<i32> {
        let mut ys: Vec<i32> = self.dates.iter().map(|d| d.year()).collect();
        ys.dedup();
        ys
    }
}

/// Credit-triangle extraction: `lambda = s / LGD` with `s` the spread as a
/// decimal (bp / 10000). Linear in the spread at fixed LGD.
pub fn extract_intensities(panel: &SpreadPanel, lgd: f64, rate: f64) -> Result<IntensityPanel> {
    if !(lgd > 0.0 && lgd <= 1.0) {
        return Err(Error::Validation(format!(
            "LGD must lie in (0, 1], got {lgd}"
        )));
    }
    let intensities = panel.spreads.iter().map(|bp| bp / 10_000.0 / lgd).collect();
    Ok(IntensityPanel {
        dates: panel.dates.clone(),
        entities: panel.entities.clone(),
        intensities,
        lgd,
        rate,
    })
}

/// Which series the yearly taus are computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TauBasis {
    /// Intensity levels within the year.
    #[default]
    Levels,
    /// First differences of the intensity series within the year.
    Diffs,
}

impl std::str::FromStr for TauBasis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "levels" => Ok(TauBasis::Levels),
            "diffs" => Ok(TauBasis::Diffs),
            other => Err(Error::Usage(format!(
                "tau basis must be 'levels' or 'diffs', got '{other}'"
            ))),
        }
    }
}

/// Pairwise empirical Kendall taus over one calendar year of intensities.
/// Needs at least [`MIN_YEAR_OBSERVATIONS`] rows in that year.
pub fn yearly_empirical_taus(
    panel: &IntensityPanel,
    year: i32,
    basis: TauBasis,
) -> Result<TauMatrix> {
    let d = panel.entities.len();
    if d < 2 {
        return Err(Error::Usage("need at least two entities".into()));
    }
    let columns: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            let col = panel.year_column(j, year);
            match basis {
                TauBasis::Levels => col,
                TauBasis::Diffs => col.windows(2).map(|w| w[1] - w[0]).collect(),
            }
        })
        .collect();
    let n = panel.dates.iter().filter(|dte| dte.year() == year).count();
    if n < MIN_YEAR_OBSERVATIONS {
        return Err(Error::InsufficientData(format!(
            "year {year} has {n} observations, need at least {MIN_YEAR_OBSERVATIONS}"
        )));
    }
    TauMatrix::from_fn(panel.entities.clone(), |i, k| {
        empirical_tau(&columns[i - 1], &columns[k - 1])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngExt;
    use rand::SeedableRng;
    use rand_pcg::Pcg64Mcg;

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn csv(body: &str) -> (SpreadPanel, CleaningReport) {
        parse_spreads(body.as_bytes()).unwrap()
    }

    #[test]
    fn load_well_formed_panel() {
        let (panel, report) = csv("date,alpha bank,beta bank\n\
             2015-01-02,100.5,80\n\
             2015-01-05,101,81.25\n\
             2015-01-06,99,79\n");
        assert_eq!(panel.n_rows(), 3);
        assert_eq!(panel.entities(), &["alpha bank", "beta bank"]);
        assert_eq!(panel.spread(1, 1), 81.25);
        assert_eq!(report.rows_dropped, 0);
        assert_eq!(report.rows_kept, 3);
    }

    #[test]
    fn cleaning_drops_bad_rows() {
        let (panel, report) = csv("date,a,b\n\
             2015-01-02,100,80\n\
             2015-01-05,,81\n\
             2015-01-06,99,-3\n\
             2015-01-07,98,77\n");
        assert_eq!(panel.n_rows(), 2);
        assert_eq!(report.rows_dropped, 2);
        assert_eq!(report.dropped_lines, vec![3, 4]);
        assert!(report.summary().contains("dropped 2"));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let e = parse_spreads("time,a,b\n2015-01-02,1,2\n".as_bytes()).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }), "{e}");
        let e = parse_spreads("date,a,b\n2015-13-40,1,2\n".as_bytes()).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }), "{e}");
        let e = parse_spreads("date,a,b\n2015-01-02,1\n".as_bytes()).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }), "{e}");
        let e = parse_spreads("date,a,b\n2015-01-02,1,x\n".as_bytes()).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }), "{e}");
        let e = parse_spreads("date,a,b\n2015-01-05,1,2\n2015-01-02,1,2\n".as_bytes()).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e}");
    }

    #[test]
    fn csv_round_trip_is_identity() {
        let (panel, _) = csv("date,a,b,c\n\
             2015-01-02,100.125,80.7,55\n\
             2015-02-05,101.5,81.81,54.3\n\
             2016-01-06,99.99,79.0001,60\n");
        let mut buf = Vec::new();
        panel.write_csv(&mut buf).unwrap();
        let (again, report) = parse_spreads(buf.as_slice()).unwrap();
        assert_eq!(panel, again);
        assert_eq!(report.rows_dropped, 0);
    }

    #[test]
    fn intensity_extraction_values() {
        let panel = SpreadPanel::from_rows(
            vec!["a".into()],
            vec![
                (date(2015, 1, 2), vec![100.0]),
                (date(2015, 1, 3), vec![200.0]),
            ],
        )
        .unwrap();
        // credit triangle: 100bp at LGD 0.6 -> 0.0166...
        let ip = extract_intensities(&panel, 0.6, 0.01).unwrap();
        assert!((ip.intensity(0, 0) - 0.01 / 0.6).abs() < 1e-15);
        // LGD = 1: lambda equals the decimal spread
        let ip1 = extract_intensities(&panel, 1.0, 0.0).unwrap();
        assert!((ip1.intensity(1, 0) - 0.02).abs() < 1e-15);
        // linearity in the spread at fixed LGD
        assert!((ip.intensity(1, 0) - 2.0 * ip.intensity(0, 0)).abs() < 1e-15);
        assert!(extract_intensities(&panel, 0.0, 0.0).is_err());
        assert!(extract_intensities(&panel, 1.5, 0.0).is_err());
    }

    #[test]
    fn credit_triangle_agrees_with_one_period_pricer() {
        // fair spread of a one-period CDS: s * dt * D * G(dt) = LGD * D * (1 - G(dt))
        // with G(dt) = exp(-lambda dt); the triangle lambda = s/LGD must
        // reproduce the quoted spread to well under a percent at desk scale
        let one_period_fair_spread = |lambda: f64, lgd: f64, dt: f64| -> f64 {
            lgd * (1.0 - (-lambda * dt).exp()) / (dt * (-lambda * dt).exp())
        };
        let quoted_bp = 100.0;
        let lgd = 0.6;
        let lambda = quoted_bp / 10_000.0 / lgd;
        let implied = one_period_fair_spread(lambda, lgd, 0.25) * 10_000.0;
        assert!(
            (implied - quoted_bp).abs() / quoted_bp < 0.01,
            "implied {implied}bp vs {quoted_bp}bp"
        );
    }

    fn yearly_panel(n_days: usize, mut f: impl FnMut(usize) -> Vec<f64>) -> IntensityPanel {
        let entities = vec!["a".to_string(), "b".to_string()];
        let mut rows = Vec::new();
        let mut d = date(2015, 1, 1);
        for i in 0..n_days {
            rows.push((d, f(i)));
            d = d.succ_opt().unwrap();
        }
        let panel = SpreadPanel::from_rows(entities, rows).unwrap();
        extract_intensities(&panel, 0.6, 0.0).unwrap()
    }

    #[test]
    fn identical_series_give_unit_tau() {
        let p = yearly_panel(40, |i| vec![100.0 + i as f64, 100.0 + i as f64]);
        let m = yearly_empirical_taus(&p, 2015, TauBasis::Levels).unwrap();
        assert_eq!(m.get(1, 2), 1.0);
    }

    #[test]
    fn white_noise_tau_is_small() {
        let mut rng = Pcg64Mcg::seed_from_u64(2);
        let p = yearly_panel(250, |_| {
            vec![
                100.0 + 50.0 * rng.random::<f64>(),
                100.0 + 50.0 * rng.random::<f64>(),
            ]
        });
        let m = yearly_empirical_taus(&p, 2015, TauBasis::Levels).unwrap();
        assert!(m.get(1, 2).abs() <= 0.15, "tau {}", m.get(1, 2));
    }

    #[test]
    fn taus_invariant_under_increasing_transforms() {
        let mut rng = Pcg64Mcg::seed_from_u64(9);
        let raw: Vec<(f64, f64)> = (0..60)
            .map(|_| (rng.random::<f64>(), rng.random::<f64>()))
            .collect();
        let p1 = yearly_panel(60, |i| {
            vec![100.0 * (1.0 + raw[i].0), 100.0 * (1.0 + raw[i].1)]
        });
        // strictly increasing per-entity transforms of the same draws
        let p2 = yearly_panel(60, |i| {
            vec![
                (3.0 * raw[i].0).exp() * 50.0,
                100.0 * (1.0 + raw[i].1).powi(3),
            ]
        });
        let m1 = yearly_empirical_taus(&p1, 2015, TauBasis::Levels).unwrap();
        let m2 = yearly_empirical_taus(&p2, 2015, TauBasis::Levels).unwrap();
        assert_eq!(m1.get(1, 2), m2.get(1, 2));
    }

    #[test]
    fn insufficient_year_is_an_error_naming_the_year() {
        let p = yearly_panel(10, |i| vec![100.0 + i as f64, 90.0]);
        let e = yearly_empirical_taus(&p, 2015, TauBasis::Levels).unwrap_err();
        assert!(matches!(e, Error::InsufficientData(_)));
        assert!(e.to_string().contains("2015"), "{e}");
        let e = yearly_empirical_taus(&p, 2019, TauBasis::Levels).unwrap_err();
        assert!(e.to_string().contains("2019"), "{e}");
    }

    #[test]
    fn diffs_basis_differs_from_levels() {
        let mut rng = Pcg64Mcg::seed_from_u64(77);
        // trending series: levels highly concordant, diffs near noise
        let p = yearly_panel(100, |i| {
            vec![
                100.0 + i as f64 + rng.random::<f64>(),
                200.0 + i as f64 + rng.random::<f64>(),
            ]
        });
        let levels = yearly_empirical_taus(&p, 2015, TauBasis::Levels).unwrap();
        let diffs = yearly_empirical_taus(&p, 2015, TauBasis::Diffs).unwrap();
        assert!(levels.get(1, 2) > 0.9);
        assert!(diffs.get(1, 2).abs() < 0.3);
        assert!("levels".parse::<TauBasis>().is_ok());
        assert!("x".parse::<TauBasis>().is_err());
    }
}
