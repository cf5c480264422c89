//! File formats: plain PGM snapshots and fixed-column CSV tables.
//!
//! Numbers are written with 9 significant digits in positional notation; integers (counts,
//! interface positions) are written as integers. Formatting never depends on locale.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::lattice::{Configuration, SiteState};
use crate::meanfield::Trajectory;
use crate::observables::TimeSeriesRecord;
use crate::stats::ProportionEstimate;

/// `x` with 9 significant digits, without exponent.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x == 0.0 { "0".into() } else { format!("{x}") };
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (8 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // rounding can carry into a new leading digit; one less decimal keeps 9 digits
    let carried = s.parse::<f64>().is_ok_and(|r| r.abs() >= 10f64.powi(magnitude + 1));
    if carried && decimals > 0 {
        let d = decimals - 1;
        return format!("{x:.d$}");
    }
    s
}

/// Header plus rows as CSV text.
fn csv_text<I, R>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("in-memory CSV");
    for row in rows {
        w.write_record(row).expect("rows match the header");
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV")).expect("CSV cells are UTF-8")
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, text)?;
    Ok(())
}

/// Gray level of a site state.
///
/// With at most two host types: unassociated host 1 is white, unassociated host 2 black and
/// every associated host mid-gray. With more types every (host, associated) class gets its
/// own evenly spaced level.
pub fn gray_level(state: SiteState, kappa: usize) -> u8 {
    if kappa <= 2 {
        return match (state.host, state.symbiont) {
            (_, s) if s != 0 => 128,
            (1, _) => 255,
            _ => 0,
        };
    }
    let class = (state.host as usize - 1) * 2 + (state.symbiont != 0) as usize;
    let classes = 2 * kappa - 1;
    (255 - (255 * class + classes / 2) / classes) as u8
}

fn palette_comment(kappa: usize) -> String {
    if kappa <= 2 {
        return "# palette: unassociated host 1 = 255, unassociated host 2 = 0, associated = 128".into();
    }
    let mut s = String::from("# palette:");
    for host in 1..=kappa as u8 {
        let _ = write!(
            s,
            " host {host} = {}, host {host} associated = {};",
            gray_level(SiteState::unassociated(host), kappa),
            gray_level(SiteState::new(host, 1), kappa)
        );
    }
    s.pop();
    s
}

/// Plain-text P2 graymap of a two-dimensional configuration; rows follow the first coordinate.
pub fn snapshot_pgm(config: &Configuration, kappa: usize) -> Result<String> {
    let g = config.geometry();
    if g.dimension() != 2 {
        return Err(Error::Precondition(format!("snapshots need d = 2, got d = {}", g.dimension())));
    }
    let side = g.side();
    let mut out = format!("P2\n{}\n{side} {side}\n255\n", palette_comment(kappa));
    for row in config.sites().chunks(side) {
        let line: Vec<String> = row.iter().map(|&s| gray_level(s, kappa).to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    Ok(out)
}

pub fn write_snapshot(config: &Configuration, kappa: usize, path: &Path) -> Result<()> {
    write_text(path, &snapshot_pgm(config, kappa)?)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graymap {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub pixels: Vec<u16>,
}

pub fn parse_pgm(text: &str) -> Result<Graymap> {
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace);
    if tokens.next() != Some("P2") {
        return Err(Error::Parse("not a plain PGM file".into()));
    }
    let mut number = |what: &str| -> Result<usize> {
        tokens
            .next()
            .ok_or_else(|| Error::Parse(format!("missing {what}")))?
            .parse()
            .map_err(|e| Error::Parse(format!("bad {what}: {e}")))
    };
    let width = number("width")?;
    let height = number("height")?;
    let maxval = number("maxval")? as u16;
    let pixels = (0..width * height).map(|_| number("pixel").map(|p| p as u16)).collect::<Result<_>>()?;
    Ok(Graymap { width, height, maxval, pixels })
}

pub fn read_snapshot(path: &Path) -> Result<Graymap> {
    parse_pgm(&fs::read_to_string(path)?)
}

pub fn timeseries_header(kappa: usize, with_interface: bool) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=kappa).map(|i| format!("u_{i}")));
    for i in 1..=kappa {
        h.extend((1..=kappa).map(|j| format!("v_{i}{j}")));
    }
    h.push("zeta_bar".into());
    if with_interface {
        h.extend(["r2", "l1", "gap"].map(String::from));
    }
    h
}

pub fn timeseries_csv(records: &[TimeSeriesRecord], kappa: usize) -> String {
    let with_interface = records.iter().any(|r| r.interface.is_some());
    let header = timeseries_header(kappa, with_interface);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = records.iter().map(|r| {
        let mut row = vec![fmt_sig(r.t)];
        row.extend(r.densities.u().into_iter().map(fmt_sig));
        row.extend(r.densities.v().into_iter().map(fmt_sig));
        row.push(fmt_sig(r.zeta_bar()));
        if with_interface {
            match r.interface {
                Some(i) => row.extend([i.r2, i.l1, i.gap].map(|v| v.to_string())),
                None => row.extend(["", "", ""].map(String::from)),
            }
        }
        row
    });
    csv_text(&header, rows)
}

pub fn write_timeseries(records: &[TimeSeriesRecord], kappa: usize, path: &Path) -> Result<()> {
    write_text(path, &timeseries_csv(records, kappa))
}

/// A numeric CSV table with a header row; empty cells read as NaN.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

pub fn parse_csv(text: &str) -> Result<Table> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> =
        reader.headers().map_err(|e| Error::Parse(e.to_string()))?.iter().map(String::from).collect();
    if header.is_empty() {
        return Err(Error::Parse("empty CSV".into()));
    }
    let mut rows = Vec::new();
    for (n, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(format!("row {}: {e}", n + 1)))?;
        let row: Vec<f64> = record
            .iter()
            .map(|c| if c.is_empty() { Ok(f64::NAN) } else { c.parse() })
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("row {}: {e}", n + 1)))?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}

pub fn read_csv(path: &Path) -> Result<Table> {
    parse_csv(&fs::read_to_string(path)?)
}

pub fn trajectory_csv(traj: &Trajectory, kappa: usize) -> String {
    let mut header = timeseries_header(kappa, false);
    header.pop();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = traj.times.iter().zip(&traj.states).map(|(t, s)| {
        std::iter::once(*t).chain(s.as_slice().iter().copied()).map(fmt_sig).collect::<Vec<_>>()
    });
    csv_text(&header, rows)
}

pub fn write_trajectory(traj: &Trajectory, kappa: usize, path: &Path) -> Result<()> {
    write_text(path, &trajectory_csv(traj, kappa))
}

pub fn proportions_csv(estimates: &[ProportionEstimate]) -> String {
    let rows = estimates.iter().map(|e| {
        [fmt_sig(e.parameter), e.replicates.to_string(), e.successes.to_string(), fmt_sig(e.lo), fmt_sig(e.hi)]
    });
    csv_text(&["parameter", "replicates", "successes", "lo", "hi"], rows)
}

pub fn write_proportions(estimates: &[ProportionEstimate], path: &Path) -> Result<()> {
    write_text(path, &proportions_csv(estimates))
}

/// Writes an arbitrary table with a header; cells are already formatted.
pub fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    if let Some(r) = rows.iter().find(|r| r.len() != header.len()) {
        return Err(Error::Input(format!("row has {} cells, header has {}", r.len(), header.len())));
    }
    write_text(path, &csv_text(header, rows))
}
