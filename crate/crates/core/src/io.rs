//! CSV formats for series, modes, spectra and glide tracks.
//!
//! Every file opens with a `# key=value ...` line. Numbers are written with
//! 17 significant digits so that reading a file back reproduces the stored
//! values exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::glide::ModeTrack;
use crate::kds::Spectrum;
use crate::modal::{Mode, Ranks};
use crate::signal::{Samples, TimeSeries};

const MODE_COLUMNS: &str = "frequency_hz,growth_rate,amplitude,phase_rad";
const SPECTRUM_COLUMNS: &str = "frequency_hz,value";
const TRACK_COLUMNS: &str = "window_start_index,window_start_time,frequency_hz,growth_rate,amplitude,phase_rad";

/// Lossless decimal form of `x`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(text: &str, line: usize) -> Result<f64> {
    text.trim()
        .parse()
        .map_err(|_| Error::Parse { line, message: format!("not a number: '{}'", text.trim()) })
}

fn parse_usize(text: &str, line: usize) -> Result<usize> {
    text.trim()
        .parse()
        .map_err(|_| Error::Parse { line, message: format!("not a count: '{}'", text.trim()) })
}

/// Parsed `# key=value ...` line.
struct Header(Vec<(String, String)>);

impl Header {
    fn parse(line: &str, number: usize) -> Result<Header> {
        let body = line
            .trim()
            .strip_prefix('#')
            .ok_or_else(|| Error::Parse { line: number, message: "expected a '#' header line".into() })?;
        let pairs = body
            .split_whitespace()
            .map(|tok| {
                tok.split_once('=')
                    .map(|(k, v)| (k.to_string(), v.to_string()))
                    .ok_or_else(|| Error::Parse { line: number, message: format!("malformed header entry '{tok}'") })
            })
            .collect::<Result<_>>()?;
        Ok(Header(pairs))
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Parse { line: 1, message: format!("header is missing '{key}'") })
    }
}

/// Non-empty lines with their 1-based line numbers.
fn lines(reader: impl Read) -> Result<Vec<(usize, String)>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

fn split_header(reader: impl Read) -> Result<(Header, Vec<(usize, String)>)> {
    let mut all = lines(reader)?;
    if all.is_empty() {
        return Err(Error::Parse { line: 1, message: "empty file".into() });
    }
    let (n, first) = all.remove(0);
    Ok((Header::parse(&first, n)?, all))
}

fn expect_columns(rows: &mut Vec<(usize, String)>, expected: &str) -> Result<()> {
    match rows.first() {
        Some((_, l)) if l.trim().starts_with(expected) => {
            rows.remove(0);
            Ok(())
        }
        Some((n, l)) => Err(Error::Parse { line: *n, message: format!("expected column header '{expected}', got '{l}'") }),
        None => Err(Error::Parse { line: 2, message: "missing column header".into() }),
    }
}

fn fields(line: &str) -> Vec<&str> {
    line.split(',').map(str::trim).collect()
}

pub fn write_time_series(mut w: impl Write, ts: &TimeSeries) -> Result<()> {
    writeln!(w, "# dt={} t0={}", fmt_f64(ts.dt()), fmt_f64(ts.t0()))?;
    match ts.samples() {
        Samples::Real(v) => {
            for x in v {
                writeln!(w, "{}", fmt_f64(*x))?;
            }
        }
        Samples::Complex(v) => {
            for z in v {
                writeln!(w, "{},{}", fmt_f64(z.re), fmt_f64(z.im))?;
            }
        }
    }
    Ok(())
}

/// One column gives a real series, two columns (`re,im`) a complex one.
pub fn read_time_series(r: impl Read) -> Result<TimeSeries> {
    let (header, rows) = split_header(r)?;
    let dt = parse_f64(header.require("dt")?, 1)?;
    let t0 = header.get("t0").map(|v| parse_f64(v, 1)).transpose()?.unwrap_or(0.0);
    let width = rows.first().map(|(_, l)| fields(l).len()).unwrap_or(1);
    let samples = match width {
        1 => Samples::Real(rows.iter().map(|(n, l)| parse_f64(l, *n)).collect::<Result<_>>()?),
        2 => Samples::Complex(
            rows.iter()
                .map(|(n, l)| match fields(l).as_slice() {
                    [re, im] => Ok(Complex64::new(parse_f64(re, *n)?, parse_f64(im, *n)?)),
                    _ => Err(Error::Parse { line: *n, message: "expected two columns".into() }),
                })
                .collect::<Result<_>>()?,
        ),
        _ => {
            return Err(Error::Parse { line: rows[0].0, message: format!("expected 1 or 2 columns, got {width}") })
        }
    };
    TimeSeries::new(samples, dt, t0).map_err(|e| Error::Parse { line: 1, message: e.to_string() })
}

/// Contents of a modes file.
#[derive(Debug, Clone, PartialEq)]
pub struct ModesFile {
    pub dt: f64,
    pub d: usize,
    pub ranks: Ranks,
    pub modes: Vec<Mode>,
}

pub fn write_modes(mut w: impl Write, file: &ModesFile) -> Result<()> {
    let r = file.ranks;
    writeln!(w, "# dt={} d={} ranks={},{},{}", fmt_f64(file.dt), file.d, r.spatial, r.temporal, r.modes)?;
    let channels = file.modes.first().map_or(0, |m| m.shape.len());
    let mut columns = MODE_COLUMNS.to_string();
    for c in 0..channels {
        columns.push_str(&format!(",shape{c}_re,shape{c}_im"));
    }
    writeln!(w, "{columns}")?;
    for m in &file.modes {
        if m.shape.len() != channels {
            return Err(Error::DimensionMismatch("modes have different shape lengths".into()));
        }
        let mut row = [m.frequency_hz, m.growth_rate, m.amplitude, m.phase_rad].map(fmt_f64).join(",");
        for z in &m.shape {
            row.push_str(&format!(",{},{}", fmt_f64(z.re), fmt_f64(z.im)));
        }
        writeln!(w, "{row}")?;
    }
    Ok(())
}

/// Eigenvalues are rebuilt from the rates and `dt`.
pub fn read_modes(r: impl Read) -> Result<ModesFile> {
    let (header, mut rows) = split_header(r)?;
    let dt = parse_f64(header.require("dt")?, 1)?;
    let d = parse_usize(header.require("d")?, 1)?;
    let ranks: Vec<usize> = header
        .require("ranks")?
        .split(',')
        .map(|v| parse_usize(v, 1))
        .collect::<Result<_>>()?;
    let [spatial, temporal, count] = ranks[..] else {
        return Err(Error::Parse { line: 1, message: "ranks needs three entries".into() });
    };
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Parse { line: 1, message: format!("dt must be positive, got {dt}") });
    }
    expect_columns(&mut rows, MODE_COLUMNS)?;
    let modes = rows
        .iter()
        .map(|(n, l)| {
            let f = fields(l);
            if f.len() < 4 || f.len() % 2 != 0 {
                return Err(Error::Parse { line: *n, message: format!("unexpected column count {}", f.len()) });
            }
            let v = f.iter().map(|x| parse_f64(x, *n)).collect::<Result<Vec<f64>>>()?;
            let shape = v[4..].chunks(2).map(|p| Complex64::new(p[0], p[1])).collect();
            Ok(Mode::from_rates(v[0], v[1], v[2], v[3], shape, dt))
        })
        .collect::<Result<Vec<Mode>>>()?;
    Ok(ModesFile { dt, d, ranks: Ranks { spatial, temporal, modes: count }, modes })
}

pub fn write_spectrum(mut w: impl Write, spec: &Spectrum) -> Result<()> {
    let meta: Vec<String> = spec.meta.iter().map(|(k, v)| format!("{k}={}", v.replace(char::is_whitespace, "_"))).collect();
    writeln!(w, "# {}", meta.join(" "))?;
    writeln!(w, "{SPECTRUM_COLUMNS}")?;
    for (f, v) in spec.frequencies.iter().zip(&spec.values) {
        writeln!(w, "{},{}", fmt_f64(*f), fmt_f64(*v))?;
    }
    Ok(())
}

pub fn read_spectrum(r: impl Read) -> Result<Spectrum> {
    let (header, mut rows) = split_header(r)?;
    expect_columns(&mut rows, SPECTRUM_COLUMNS)?;
    let mut freqs = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len());
    for (n, l) in &rows {
        match fields(l).as_slice() {
            [f, v] => {
                freqs.push(parse_f64(f, *n)?);
                values.push(parse_f64(v, *n)?);
            }
            _ => return Err(Error::Parse { line: *n, message: "expected two columns".into() }),
        }
    }
    Spectrum::new(freqs, values, header.0)
}

/// Long format: one row per (window, mode). The header lists the window
/// count, per-window mode counts and the windows that failed.
pub fn write_tracks(mut w: impl Write, tracks: &[ModeTrack]) -> Result<()> {
    let counts: Vec<String> = tracks.iter().map(|t| t.modes.len().to_string()).collect();
    let failed: Vec<String> = tracks.iter().filter(|t| t.failed()).map(|t| t.window_start_index.to_string()).collect();
    writeln!(
        w,
        "# windows={} mode_counts={} failed={}",
        tracks.len(),
        if counts.is_empty() { "-".into() } else { counts.join(",") },
        if failed.is_empty() { "-".into() } else { failed.join(",") },
    )?;
    writeln!(w, "{TRACK_COLUMNS}")?;
    for t in tracks {
        for m in &t.modes {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                t.window_start_index,
                fmt_f64(t.window_start_time),
                fmt_f64(m.frequency_hz),
                fmt_f64(m.growth_rate),
                fmt_f64(m.amplitude),
                fmt_f64(m.phase_rad)
            )?;
        }
    }
    Ok(())
}

/// One row of a track file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackRow {
    pub window_start_index: usize,
    pub window_start_time: f64,
    pub frequency_hz: f64,
    pub growth_rate: f64,
    pub amplitude: f64,
    pub phase_rad: f64,
}

pub fn read_track_rows(r: impl Read) -> Result<Vec<TrackRow>> {
    let (_, mut rows) = split_header(r)?;
    expect_columns(&mut rows, TRACK_COLUMNS)?;
    rows.iter()
        .map(|(n, l)| match fields(l).as_slice() {
            [i, t, f, g, a, p] => Ok(TrackRow {
                window_start_index: parse_usize(i, *n)?,
                window_start_time: parse_f64(t, *n)?,
                frequency_hz: parse_f64(f, *n)?,
                growth_rate: parse_f64(g, *n)?,
                amplitude: parse_f64(a, *n)?,
                phase_rad: parse_f64(p, *n)?,
            }),
            _ => Err(Error::Parse { line: *n, message: "expected six columns".into() }),
        })
        .collect()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn save_time_series(path: &Path, ts: &TimeSeries) -> Result<()> {
    let mut w = create(path)?;
    write_time_series(&mut w, ts)?;
    Ok(w.flush()?)
}

pub fn load_time_series(path: &Path) -> Result<TimeSeries> {
    read_time_series(open(path)?)
}

pub fn save_modes(path: &Path, file: &ModesFile) -> Result<()> {
    let mut w = create(path)?;
    write_modes(&mut w, file)?;
    Ok(w.flush()?)
}

pub fn load_modes(path: &Path) -> Result<ModesFile> {
    read_modes(open(path)?)
}

pub fn save_spectrum(path: &Path, spec: &Spectrum) -> Result<()> {
    let mut w = create(path)?;
    write_spectrum(&mut w, spec)?;
    Ok(w.flush()?)
}

pub fn load_spectrum(path: &Path) -> Result<Spectrum> {
    read_spectrum(open(path)?)
}

pub fn save_tracks(path: &Path, tracks: &[ModeTrack]) -> Result<()> {
    let mut w = create(path)?;
    write_tracks(&mut w, tracks)?;
    Ok(w.flush()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn roundtrip_ts(ts: &TimeSeries) -> TimeSeries {
        let mut buf = Vec::new();
        write_time_series(&mut buf, ts).unwrap();
        read_time_series(buf.as_slice()).unwrap()
    }

    #[test]
    fn time_series_text_layout() {
        let ts = TimeSeries::from_real(vec![1.0, -0.5], 0.25).unwrap();
        let mut buf = Vec::new();
        write_time_series(&mut buf, &ts).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# dt=2.5000000000000000e-1 t0=0.0000000000000000e0");
        assert_eq!(lines[1], "1.0000000000000000e0");
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn reads_hand_written_files() {
        let ts = read_time_series("# dt=0.5\n1\n2.5\n\n-3\n".as_bytes()).unwrap();
        assert_eq!(ts.real_parts(), vec![1.0, 2.5, -3.0]);
        assert_eq!((ts.dt(), ts.t0()), (0.5, 0.0));
        let c = read_time_series("# dt=1 t0=2\n1,2\n3,4\n".as_bytes()).unwrap();
        assert_eq!(c.to_complex()[1], Complex64::new(3.0, 4.0));
        assert_eq!(c.t0(), 2.0);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        assert!(matches!(read_time_series("1\n2\n".as_bytes()), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(read_time_series("# t0=0\n1\n".as_bytes()), Err(Error::Parse { .. })));
        assert!(matches!(read_time_series("# dt=1\n1\nfoo\n".as_bytes()), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(read_time_series("# dt=1\n1,2\n3\n".as_bytes()), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(read_time_series("# dt=-1\n1\n".as_bytes()), Err(Error::Parse { .. })));
        assert!(read_time_series("".as_bytes()).is_err());
        assert!(read_modes("# dt=1 d=2 ranks=1,2\nfrequency_hz,growth_rate,amplitude,phase_rad\n".as_bytes()).is_err());
        assert!(read_spectrum("# a=b\nx,y\n".as_bytes()).is_err());
    }

    #[test]
    fn modes_file_layout() {
        let m = Mode::from_rates(2000.0, -80.0, 1.0, -1.5, vec![Complex64::new(1.0, 0.0)], 4e-5);
        let file = ModesFile { dt: 4e-5, d: 32, ranks: Ranks { spatial: 1, temporal: 2, modes: 1 }, modes: vec![m] };
        let mut buf = Vec::new();
        write_modes(&mut buf, &file).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# dt=4.0000000000000003e-5 d=32 ranks=1,2,1\n"));
        assert!(text.lines().nth(1).unwrap().ends_with("shape0_re,shape0_im"));
        assert_eq!(read_modes(buf.as_slice()).unwrap(), file);
    }

    #[test]
    fn track_rows() {
        let m = Mode::from_rates(10.0, -1.0, 2.0, 0.0, vec![Complex64::new(1.0, 0.0)], 0.01);
        let tracks = vec![
            ModeTrack { window_start_index: 0, window_start_time: 0.0, modes: vec![m.clone(), m.clone()], errors: Some((0.0, 0.0)), failure: None },
            ModeTrack { window_start_index: 64, window_start_time: 0.64, modes: vec![], errors: None, failure: Some("zero".into()) },
            ModeTrack { window_start_index: 128, window_start_time: 1.28, modes: vec![m], errors: Some((0.0, 0.0)), failure: None },
        ];
        let mut buf = Vec::new();
        write_tracks(&mut buf, &tracks).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# windows=3 mode_counts=2,0,1 failed=64\n"));
        let rows = read_track_rows(buf.as_slice()).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[2].window_start_index, 128);
        assert_eq!(rows[2].window_start_time, 1.28);
    }

    #[test]
    fn file_helpers() {
        let dir = std::env::temp_dir().join(format!("hodmd-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("x.csv");
        let ts = TimeSeries::from_real(vec![0.1, 0.2, 0.3], 1e-3).unwrap();
        save_time_series(&path, &ts).unwrap();
        assert_eq!(load_time_series(&path).unwrap(), ts);
        assert!(matches!(load_time_series(&dir.join("missing.csv")), Err(Error::Io(_))));
        std::fs::remove_dir_all(&dir).unwrap();
    }

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![prop::num::f64::NORMAL, prop::num::f64::SUBNORMAL, Just(0.0), Just(-0.0)]
    }

    proptest! {
        #[test]
        fn real_series_roundtrip(v in prop::collection::vec(finite(), 1..50), dt in 1e-9..1e3f64, t0 in -1e3..1e3f64) {
            let ts = TimeSeries::from_real(v, dt).unwrap().with_t0(t0);
            let back = roundtrip_ts(&ts);
            prop_assert_eq!(back.dt().to_bits(), ts.dt().to_bits());
            prop_assert_eq!(back.t0().to_bits(), ts.t0().to_bits());
            let a: Vec<u64> = ts.real_parts().iter().map(|x| x.to_bits()).collect();
            let b: Vec<u64> = back.real_parts().iter().map(|x| x.to_bits()).collect();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn complex_series_roundtrip(v in prop::collection::vec((finite(), finite()), 1..50)) {
            let ts = TimeSeries::from_complex(v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect(), 0.1).unwrap();
            let back = roundtrip_ts(&ts);
            prop_assert!(!back.is_real());
            prop_assert_eq!(back, ts);
        }

        #[test]
        fn modes_roundtrip(rows in prop::collection::vec((finite(), finite(), 0.0..1e6f64, -3.2..3.2f64, finite(), finite()), 0..10)) {
            let modes: Vec<Mode> = rows.iter().map(|&(f, g, a, p, re, im)| {
                Mode { frequency_hz: f, growth_rate: g, amplitude: a, phase_rad: p, shape: vec![Complex64::new(re, im), Complex64::new(im, re)], eigenvalue: Complex64::new(0.0, 0.0) }
            }).collect();
            let file = ModesFile { dt: 1e-3, d: 7, ranks: Ranks { spatial: 2, temporal: 9, modes: modes.len() }, modes };
            let mut buf = Vec::new();
            write_modes(&mut buf, &file).unwrap();
            let back = read_modes(buf.as_slice()).unwrap();
            prop_assert_eq!((back.dt, back.d, back.ranks), (file.dt, file.d, file.ranks));
            for (a, b) in back.modes.iter().zip(&file.modes) {
                prop_assert_eq!(
                    (a.frequency_hz.to_bits(), a.growth_rate.to_bits(), a.amplitude.to_bits(), a.phase_rad.to_bits()),
                    (b.frequency_hz.to_bits(), b.growth_rate.to_bits(), b.amplitude.to_bits(), b.phase_rad.to_bits())
                );
                prop_assert_eq!(&a.shape, &b.shape);
            }
            prop_assert_eq!(back.modes.len(), file.modes.len());
        }

        #[test]
        fn spectrum_roundtrip(rows in prop::collection::vec((finite(), 0.0..1e12f64), 1..50)) {
            let (f, v): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
            let spec = Spectrum::new(f, v, vec![("kernel".into(), "gaussian".into()), ("h".into(), "0.05".into())]).unwrap();
            let mut buf = Vec::new();
            write_spectrum(&mut buf, &spec).unwrap();
            prop_assert_eq!(read_spectrum(buf.as_slice()).unwrap(), spec);
        }
    }
}
