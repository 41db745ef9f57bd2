//! Touchstone v1 (`.sNp`) reader and writer.
//!
//! Supercell blocks exported from a field solver follow a fixed port
//! convention: port 1 is the RF input, port 2 the RF output, and ports
//! 3..(2+m) are the junction-branch attachment ports in propagation order,
//! one single-ended (ground-referenced) port per unit-cell branch.
//!
//! Only scattering data is accepted. Y/Z/G/H data and v2 keyword files are
//! rejected explicitly; 2-port noise blocks are skipped with a warning.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::netcore::Network;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrequencyUnit {
    Hz,
    KHz,
    MHz,
    GHz,
}

impl FrequencyUnit {
    fn exponent(self) -> i32 {
        match self {
            FrequencyUnit::Hz => 0,
            FrequencyUnit::KHz => 3,
            FrequencyUnit::MHz => 6,
            FrequencyUnit::GHz => 9,
        }
    }

    pub fn scale(self) -> f64 {
        10f64.powi(self.exponent())
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FrequencyUnit::Hz => "Hz",
            FrequencyUnit::KHz => "kHz",
            FrequencyUnit::MHz => "MHz",
            FrequencyUnit::GHz => "GHz",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    /// Real / imaginary.
    RI,
    /// Linear magnitude / angle in degrees.
    MA,
    /// Magnitude in dB / angle in degrees.
    DB,
}

impl DataFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            DataFormat::RI => "RI",
            DataFormat::MA => "MA",
            DataFormat::DB => "DB",
        }
    }
}

impl std::str::FromStr for DataFormat {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "RI" => Ok(DataFormat::RI),
            "MA" => Ok(DataFormat::MA),
            "DB" => Ok(DataFormat::DB),
            other => Err(format!("unknown data format `{other}` (expected RI, MA or DB)")),
        }
    }
}

/// Contents of the `#` option line. The parameter type is always S.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptionLine {
    pub unit: FrequencyUnit,
    pub format: DataFormat,
    pub resistance: f64,
}

impl Default for OptionLine {
    fn default() -> Self {
        Self {
            unit: FrequencyUnit::GHz,
            format: DataFormat::MA,
            resistance: 50.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TouchstoneDocument {
    pub options: OptionLine,
    pub comments: Vec<String>,
    pub network: Network,
}

impl TouchstoneDocument {
    pub fn new(network: Network) -> Self {
        let options = OptionLine {
            unit: FrequencyUnit::GHz,
            format: DataFormat::RI,
            resistance: network.z_ref()[0],
        };
        Self {
            options,
            comments: Vec::new(),
            network,
        }
    }

    /// One-line description, e.g. `2 ports, 701 points, 4.0–11.0 GHz, RI, R 50`.
    pub fn summary(&self) -> String {
        let g = self.network.grid();
        format!(
            "{} ports, {} points, {:.1}–{:.1} GHz, {}, R {}",
            self.network.n_ports(),
            g.len(),
            g.first() / 1e9,
            g.last() / 1e9,
            self.options.format.as_str(),
            self.options.resistance
        )
    }
}

/// Port count implied by a `.sNp` extension.
pub fn ports_from_path(path: &Path) -> Result<usize> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    if ext == "ts" {
        return Err(Error::Unsupported {
            line: 1,
            what: "Touchstone v2 file (.ts); only v1 .sNp files are read".into(),
        });
    }
    ext.strip_prefix('s')
        .and_then(|r| r.strip_suffix('p'))
        .and_then(|n| n.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("cannot infer port count from extension `.{ext}` (expected .sNp)"),
        })
}

/// Parses a decimal token and multiplies it by 10^`exp10` without an
/// intermediate rounding step, so equal quantities written in different
/// units produce identical values.
fn parse_scaled(token: &str, exp10: i32) -> Option<f64> {
    if exp10 == 0 {
        return token.parse().ok();
    }
    let (mantissa, exp) = match token.find(['e', 'E']) {
        Some(i) => (&token[..i], token[i + 1..].parse::<i32>().ok()?),
        None => (token, 0),
    };
    mantissa.parse::<f64>().ok()?;
    format!("{mantissa}e{}", exp + exp10).parse().ok()
}

fn parse_option_line(body: &str, line: usize) -> Result<OptionLine> {
    let mut opts = OptionLine::default();
    let mut tokens = body.split_whitespace();
    while let Some(tok) = tokens.next() {
        match tok.to_ascii_uppercase().as_str() {
            "HZ" => opts.unit = FrequencyUnit::Hz,
            "KHZ" => opts.unit = FrequencyUnit::KHz,
            "MHZ" => opts.unit = FrequencyUnit::MHz,
            "GHZ" => opts.unit = FrequencyUnit::GHz,
            "S" => {}
            p @ ("Y" | "Z" | "G" | "H") => {
                return Err(Error::Unsupported {
                    line,
                    what: format!("parameter type {p} (only S is supported)"),
                })
            }
            "RI" => opts.format = DataFormat::RI,
            "MA" => opts.format = DataFormat::MA,
            "DB" => opts.format = DataFormat::DB,
            "R" => {
                let r = tokens
                    .next()
                    .and_then(|t| t.parse::<f64>().ok())
                    .filter(|r| r.is_finite() && *r > 0.0)
                    .ok_or_else(|| Error::Parse {
                        line,
                        message: "option line `R` must be followed by a positive resistance".into(),
                    })?;
                opts.resistance = r;
            }
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("unrecognized option `{other}`"),
                })
            }
        }
    }
    Ok(opts)
}

fn pair_to_complex(a: f64, b: f64, format: DataFormat) -> Complex64 {
    match format {
        DataFormat::RI => Complex64::new(a, b),
        DataFormat::MA => Complex64::from_polar(a, b.to_radians()),
        DataFormat::DB => Complex64::from_polar(10f64.powf(a / 20.0), b.to_radians()),
    }
}

/// Matrix position of the `k`-th value pair of a record.
fn pair_position(k: usize, n_ports: usize) -> (usize, usize) {
    if n_ports == 2 {
        // S11 S21 S12 S22
        (k % 2, k / 2)
    } else {
        (k / n_ports, k % n_ports)
    }
}

pub fn parse_touchstone(text: &str, n_ports: usize) -> Result<TouchstoneDocument> {
    if n_ports == 0 {
        return Err(Error::param("n_ports", "must be at least 1"));
    }
    let record_len = 1 + 2 * n_ports * n_ports;
    let mut options: Option<OptionLine> = None;
    let mut comments = Vec::new();
    let mut freqs: Vec<f64> = Vec::new();
    let mut mats: Vec<DMatrix<Complex64>> = Vec::new();
    let mut pending: Vec<f64> = Vec::new();
    let mut pending_start = 0usize;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let (content, comment) = match raw.find('!') {
            Some(i) => (&raw[..i], Some(&raw[i + 1..])),
            None => (raw, None),
        };
        if let Some(c) = comment {
            comments.push(c.trim().to_string());
        }
        let content = content.trim();
        if content.is_empty() {
            continue;
        }
        if content.starts_with('[') {
            return Err(Error::Unsupported {
                line: line_no,
                what: format!("keyword `{content}` (Touchstone v2 is not supported)"),
            });
        }
        if let Some(body) = content.strip_prefix('#') {
            // Only the first option line counts.
            if options.is_none() {
                options = Some(parse_option_line(body, line_no)?);
            }
            continue;
        }
        let opts = options.ok_or_else(|| Error::Parse {
            line: line_no,
            message: "missing option line before data".into(),
        })?;

        let tokens: Vec<&str> = content.split_whitespace().collect();
        if pending.is_empty() {
            pending_start = line_no;
            let f = parse_scaled(tokens[0], opts.unit.exponent()).ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("invalid frequency `{}`", tokens[0]),
            })?;
            if let Some(&prev) = freqs.last() {
                if f <= prev {
                    if n_ports == 2 && tokens.len() == 5 {
                        log::warn!("line {line_no}: noise parameter block ignored");
                        break;
                    }
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("frequency {f} Hz does not increase (previous {prev} Hz)"),
                    });
                }
            }
            pending.push(f);
            for t in &tokens[1..] {
                pending.push(parse_number(t, line_no)?);
            }
        } else {
            for t in &tokens {
                pending.push(parse_number(t, line_no)?);
            }
        }

        let single_line = n_ports <= 2;
        if pending.len() > record_len || (single_line && pending.len() != record_len) {
            return Err(Error::Parse {
                line: line_no,
                message: format!(
                    "wrong value count: expected {record_len} values per {n_ports}-port record, got {}",
                    pending.len()
                ),
            });
        }
        if pending.len() == record_len {
            let mut m = DMatrix::zeros(n_ports, n_ports);
            for k in 0..n_ports * n_ports {
                let (r, c) = pair_position(k, n_ports);
                m[(r, c)] = pair_to_complex(pending[1 + 2 * k], pending[2 + 2 * k], opts.format);
            }
            freqs.push(pending[0]);
            mats.push(m);
            pending.clear();
        }
    }

    if !pending.is_empty() {
        return Err(Error::Parse {
            line: pending_start,
            message: format!(
                "incomplete record: expected {record_len} values, got {}",
                pending.len()
            ),
        });
    }
    let options = options.ok_or(Error::Parse {
        line: 1,
        message: "missing option line".into(),
    })?;
    if freqs.is_empty() {
        return Err(Error::Parse {
            line: text.lines().count().max(1),
            message: "no data records".into(),
        });
    }
    let grid = FrequencyGrid::new(freqs).map_err(|e| Error::Parse {
        line: pending_start,
        message: e.to_string(),
    })?;
    let network = Network::new(grid, mats, vec![options.resistance; n_ports])?;
    Ok(TouchstoneDocument {
        options,
        comments,
        network,
    })
}

fn parse_number(t: &str, line: usize) -> Result<f64> {
    t.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse {
            line,
            message: format!("invalid number `{t}`"),
        })
}

/// Magnitudes below this are written as this floor in dB format.
const DB_FLOOR: f64 = -1000.0;

fn format_pair(v: Complex64, format: DataFormat, precision: usize) -> String {
    let p = precision.saturating_sub(1);
    // Angles carry one extra digit so that the angle rounding does not
    // dominate the magnitude rounding near +-180 degrees.
    match format {
        DataFormat::RI => format!("{:.p$e} {:.p$e}", v.re, v.im),
        DataFormat::MA => format!("{:.p$e} {:.q$e}", v.norm(), v.arg().to_degrees(), q = p + 1),
        DataFormat::DB => {
            let mag = v.norm();
            let db = if mag > 0.0 { (20.0 * mag.log10()).max(DB_FLOOR) } else { DB_FLOOR };
            format!("{:.p$e} {:.q$e}", db, v.arg().to_degrees(), q = p + 1)
        }
    }
}

/// Serializes a document with the given data format and number of
/// significant digits. Frequencies use the document's unit.
pub fn write_touchstone(doc: &TouchstoneDocument, format: DataFormat, precision: usize) -> String {
    let precision = precision.max(1);
    let net = &doc.network;
    let n = net.n_ports();
    let mut out = String::new();
    for c in &doc.comments {
        let _ = writeln!(out, "! {c}");
    }
    let _ = writeln!(
        out,
        "# {} S {} R {}",
        doc.options.unit.as_str(),
        format.as_str(),
        doc.options.resistance
    );
    let scale = doc.options.unit.scale();
    for (f, m) in net.grid().iter().zip(net.s()) {
        let pairs: Vec<String> = (0..n * n)
            .map(|k| {
                let (r, c) = pair_position(k, n);
                format_pair(m[(r, c)], format, precision)
            })
            .collect();
        let freq = format!("{}", f / scale);
        if n <= 2 {
            let _ = writeln!(out, "{freq} {}", pairs.join(" "));
        } else {
            // One matrix row per group of lines, at most four pairs per line.
            let mut first = true;
            for row in pairs.chunks(n) {
                for chunk in row.chunks(4) {
                    if first {
                        let _ = writeln!(out, "{freq} {}", chunk.join(" "));
                        first = false;
                    } else {
                        let _ = writeln!(out, "  {}", chunk.join(" "));
                    }
                }
            }
        }
    }
    out
}

/// Largest per-entry relative difference between two networks on the same
/// grid, with `floor` guarding entries that are exactly zero.
pub fn max_relative_difference(a: &Network, b: &Network, floor: f64) -> Result<f64> {
    if a.grid().len() != b.grid().len() || a.n_ports() != b.n_ports() {
        return Err(Error::GridMismatch);
    }
    let mut worst: f64 = 0.0;
    for (x, y) in a.s().iter().zip(b.s()) {
        for (u, v) in x.iter().zip(y.iter()) {
            let d = (u - v).norm() / u.norm().max(v.norm()).max(floor);
            worst = worst.max(d);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn two_port_through_ri() {
        let text = "# GHz S RI R 50\n1.0 0.0 0.0 1.0 0.0 1.0 0.0 0.0 0.0\n";
        let d = parse_touchstone(text, 2).unwrap();
        assert_eq!(d.network.grid().points(), &[1e9]);
        let s = &d.network.s()[0];
        assert_eq!(s[(0, 0)], c(0.0, 0.0));
        assert_eq!(s[(1, 0)], c(1.0, 0.0));
        assert_eq!(s[(0, 1)], c(1.0, 0.0));
    }

    #[test]
    fn two_port_order_is_s11_s21_s12_s22() {
        let text = "# Hz S RI R 50\n1 1 0 2 0 3 0 4 0\n";
        let doc = parse_touchstone(text, 2).unwrap();
        let s = &doc.network.s()[0];
        assert_eq!(s[(0, 0)].re, 1.0);
        assert_eq!(s[(1, 0)].re, 2.0);
        assert_eq!(s[(0, 1)].re, 3.0);
        assert_eq!(s[(1, 1)].re, 4.0);
    }

    #[test]
    fn short_two_port_line_reports_line_number() {
        let text = "! through\n# GHz S RI R 50\n1.0 0.0 0.0 1.0 0.0 0.0 0.0\n";
        let err = parse_touchstone(text, 2).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn one_port_magnitude_angle() {
        let d = parse_touchstone("# MHz S MA R 50\n1000 0.5 90\n", 1).unwrap();
        assert_eq!(d.network.grid().points(), &[1e9]);
        let s = d.network.s()[0][(0, 0)];
        assert!((s - c(0.0, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn db_entry() {
        let d = parse_touchstone("# GHz S DB R 50\n1 -6.0206 0\n", 1).unwrap();
        assert!((d.network.s()[0][(0, 0)].re - 0.5).abs() < 1e-5);
    }

    #[test]
    fn defaults_when_option_line_is_bare() {
        let d = parse_touchstone("#\n2 0.1 0\n", 1).unwrap();
        assert_eq!(d.options, OptionLine::default());
        assert_eq!(d.network.grid().points(), &[2e9]);
    }

    #[test]
    fn missing_option_line() {
        let err = parse_touchstone("! hi\n1 0 0\n", 1).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(parse_touchstone("", 1).is_err());
    }

    #[test]
    fn unsupported_parameter_types() {
        for p in ["Y", "Z", "G", "H"] {
            let err = parse_touchstone(&format!("# GHz {p} RI R 50\n1 0 0\n"), 1).unwrap_err();
            assert!(matches!(err, Error::Unsupported { line: 1, .. }), "{p}: {err:?}");
        }
        let err = parse_touchstone("[Version] 2.0\n# GHz S RI\n", 1).unwrap_err();
        assert!(matches!(err, Error::Unsupported { line: 1, .. }));
    }

    #[test]
    fn non_monotonic_frequency() {
        let err = parse_touchstone("# GHz S RI R 50\n2 0 0\n1 0 0\n", 1).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
    }

    #[test]
    fn noise_block_is_skipped() {
        let text = "# GHz S RI R 50\n1 0 0 1 0 1 0 0 0\n2 0 0 1 0 1 0 0 0\n1 0.5 0.1 10 0.2\n";
        let d = parse_touchstone(text, 2).unwrap();
        assert_eq!(d.network.grid().len(), 2);
    }

    #[test]
    fn wrapped_four_port_and_comments_anywhere() {
        let text = "! header\n# GHz S RI R 50\n\n1 1 0 0 0 0 0 0 0 ! row 1\n  0 0 1 0 0 0 0 0\n\n  0 0 0 0 1 0 0 0\n  0 0 0 0   0 0 1 0\n";
        let d = parse_touchstone(text, 4).unwrap();
        let s = &d.network.s()[0];
        for i in 0..4 {
            assert_eq!(s[(i, i)], c(1.0, 0.0));
        }
        assert_eq!(d.comments, vec!["header".to_string(), "row 1".to_string()]);
    }

    #[test]
    fn overflowing_continuation_line() {
        let text = "# GHz S RI R 50\n1 0 0 0 0 0 0\n 0 0 0 0 0 0\n 0 0 0 0 0 0 0 0\n";
        let err = parse_touchstone(text, 3).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }), "{err:?}");
        let err = parse_touchstone("# GHz S RI R 50\n1 0 0 0 0 0 0\n", 3).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn units_give_identical_grids() {
        let a = parse_touchstone("# GHz S RI R 50\n4.01 0 0\n7.62 0 0\n", 1).unwrap();
        let b = parse_touchstone("# MHz S RI R 50\n4010 0 0\n7620 0 0\n", 1).unwrap();
        let c = parse_touchstone("# kHz S RI R 50\n4010000 0 0\n7.62e6 0 0\n", 1).unwrap();
        let d = parse_touchstone("# Hz S RI R 50\n4010000000 0 0\n7620000000 0 0\n", 1).unwrap();
        assert_eq!(a.network.grid(), b.network.grid());
        assert_eq!(a.network.grid(), c.network.grid());
        assert_eq!(a.network.grid(), d.network.grid());
    }

    #[test]
    fn comma_decimal_is_rejected() {
        assert!(parse_touchstone("# GHz S RI R 50\n1,5 0 0\n", 1).is_err());
    }

    #[test]
    fn through_in_db_is_zero_db() {
        let d = parse_touchstone("# GHz S RI R 50\n1 0 0 1 0 1 0 0 0\n", 2).unwrap();
        let text = write_touchstone(&d, DataFormat::DB, 6);
        let data = text.lines().nth(1).unwrap();
        let v: Vec<f64> = data.split_whitespace().map(|t| t.parse().unwrap()).collect();
        assert_eq!(v[3], 0.0);
        assert_eq!(v[5], 0.0);
        let back = parse_touchstone(&text, 2).unwrap();
        assert!(max_relative_difference(&d.network, &back.network, 1e-30).unwrap() < 1e-12);
    }

    #[test]
    fn extension_port_count() {
        assert_eq!(ports_from_path(Path::new("a/b.s2p")).unwrap(), 2);
        assert_eq!(ports_from_path(Path::new("x.S10P")).unwrap(), 10);
        assert!(matches!(ports_from_path(Path::new("x.ts")), Err(Error::Unsupported { .. })));
        assert!(ports_from_path(Path::new("x.txt")).is_err());
    }

    #[test]
    fn summary_line() {
        let grid = FrequencyGrid::linspace(4e9, 11e9, 701).unwrap();
        let s = vec![DMatrix::identity(2, 2); 701];
        let doc = TouchstoneDocument::new(Network::new(grid, s, vec![50.0; 2]).unwrap());
        assert_eq!(doc.summary(), "2 ports, 701 points, 4.0–11.0 GHz, RI, R 50");
    }
}
