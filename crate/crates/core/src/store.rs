//! On-disk formats: configurations and calibrations as CSV, pictures as
//! portable bitmaps, run manifests as JSON lines.
//!
//! Every writer is deterministic and every reader accepts exactly what
//! the writer produces; numbers are written with enough digits to parse
//! back bit-identically.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cade::CalibrationEntry;
use crate::experiment::{ReportBundle, RunRecord, SummaryCell};
use crate::genesis::{Configuration, Point};
use crate::morphology::EulerTrace;
use crate::raster::BinaryImage;
use crate::{Error, Result};

/// Portable bitmap flavors.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PbmFormat {
    /// P1, one ASCII digit per pixel.
    Plain,
    /// P4, rows packed 8 pixels per byte. The default: 36x smaller.
    #[default]
    Raw,
}

pub fn save_configuration(path: impl AsRef<Path>, config: &Configuration) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_configuration(&mut w, config)?;
    w.flush()?;
    Ok(())
}

pub fn write_configuration(w: &mut impl Write, config: &Configuration) -> Result<()> {
    writeln!(
        w,
        "# L={} rho={} gamma={} p={} seed={} achieved_p={}",
        config.box_size(),
        config.rho(),
        config.gamma_agg(),
        config.target_p(),
        config.seed(),
        config.achieved_p()
    )?;
    for c in config.centers() {
        writeln!(w, "{},{}", c.x, c.y)?;
    }
    Ok(())
}

pub fn load_configuration(path: impl AsRef<Path>) -> Result<Configuration> {
    read_configuration(&mut BufReader::new(File::open(path)?))
}

pub fn read_configuration(r: &mut impl BufRead) -> Result<Configuration> {
    let mut header = String::new();
    r.read_line(&mut header)?;
    let header = header
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| Error::Format("configuration must start with a # header".into()))?;
    let mut l = None;
    let mut rho = None;
    let mut gamma = None;
    let mut p = None;
    let mut seed = None;
    let mut achieved = None;
    fn bad_value(token: &str) -> Error {
        Error::Format(format!("bad header value {token:?}"))
    }
    for token in header.split_whitespace() {
        let (key, value) = token
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("bad header token {token:?}")))?;
        match key {
            "L" => l = Some(value.parse::<u32>().map_err(|_| bad_value(token))?),
            "rho" => rho = Some(value.parse::<f64>().map_err(|_| bad_value(token))?),
            "gamma" => gamma = Some(value.parse::<f64>().map_err(|_| bad_value(token))?),
            "p" => p = Some(value.parse::<f64>().map_err(|_| bad_value(token))?),
            "seed" => seed = Some(value.parse::<u64>().map_err(|_| bad_value(token))?),
            "achieved_p" => achieved = Some(value.parse::<f64>().map_err(|_| bad_value(token))?),
            _ => return Err(Error::Format(format!("unknown header key {key:?}"))),
        }
    }
    let missing = |what: &str| Error::Format(format!("header is missing {what}"));
    let (l, rho) = (l.ok_or_else(|| missing("L"))?, rho.ok_or_else(|| missing("rho"))?);
    let gamma = gamma.ok_or_else(|| missing("gamma"))?;
    let p = p.ok_or_else(|| missing("p"))?;
    let seed = seed.ok_or_else(|| missing("seed"))?;
    let achieved = achieved.ok_or_else(|| missing("achieved_p"))?;

    let mut centers = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (x, y) = line
            .split_once(',')
            .ok_or_else(|| Error::Format(format!("center row {} is not x,y", i + 1)))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Format(format!("bad coordinate {v:?} in row {}", i + 1)))
        };
        centers.push(Point::new(parse(x)?, parse(y)?));
    }
    Configuration::from_parts(centers, rho, l, gamma, p, seed, achieved)
        .map_err(|e| Error::Format(e.to_string()))
}

pub fn save_image(path: impl AsRef<Path>, image: &BinaryImage, format: PbmFormat) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_image(&mut w, image, format)?;
    w.flush()?;
    Ok(())
}

pub fn write_image(w: &mut impl Write, image: &BinaryImage, format: PbmFormat) -> Result<()> {
    let (width, height) = (image.width(), image.height());
    match format {
        PbmFormat::Plain => {
            writeln!(w, "P1")?;
            writeln!(w, "{width} {height}")?;
            let mut row = String::with_capacity(width as usize + 1);
            for y in 0..height {
                row.clear();
                for x in 0..width {
                    row.push(if image.get(x, y) { '1' } else { '0' });
                }
                writeln!(w, "{row}")?;
            }
        }
        PbmFormat::Raw => {
            writeln!(w, "P4")?;
            writeln!(w, "{width} {height}")?;
            let stride = (width as usize).div_ceil(8);
            let mut row = vec![0u8; stride];
            for y in 0..height {
                row.fill(0);
                for x in 0..width {
                    if image.get(x, y) {
                        // Leftmost pixel in the most significant bit.
                        row[(x / 8) as usize] |= 0x80 >> (x % 8);
                    }
                }
                w.write_all(&row)?;
            }
        }
    }
    Ok(())
}

pub fn load_image(path: impl AsRef<Path>) -> Result<BinaryImage> {
    read_image(&mut BufReader::new(File::open(path)?))
}

pub fn read_image(r: &mut impl BufRead) -> Result<BinaryImage> {
    let mut magic = [0u8; 2];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format("missing bitmap magic".into()))?;
    let raw = match &magic {
        b"P1" => false,
        b"P4" => true,
        _ => {
            return Err(Error::Format(format!(
                "bad bitmap magic {:?}",
                String::from_utf8_lossy(&magic)
            )))
        }
    };
    let width = read_header_int(r)?;
    let height = read_header_int(r)?;
    if width == 0 || height == 0 {
        return Err(Error::Format("bitmap with zero dimension".into()));
    }
    let mut image = BinaryImage::new(width, height);
    if raw {
        let stride = (width as usize).div_ceil(8);
        let mut row = vec![0u8; stride];
        for y in 0..height {
            r.read_exact(&mut row)
                .map_err(|_| Error::Format(format!("bitmap truncated in row {y}")))?;
            for x in 0..width {
                if row[(x / 8) as usize] & (0x80 >> (x % 8)) != 0 {
                    image.set(x, y, true);
                }
            }
        }
    } else {
        let needed = (width as usize) * (height as usize);
        let mut filled = 0usize;
        while filled < needed {
            let Some(b) = next_byte(r)? else {
                return Err(Error::Format("bitmap truncated".into()));
            };
            match b {
                b'0' | b'1' => {
                    if b == b'1' {
                        image.set(filled as u32 % width, filled as u32 / width, true);
                    }
                    filled += 1;
                }
                b'#' => skip_comment_line(r)?,
                _ if b.is_ascii_whitespace() => {}
                _ => return Err(Error::Format(format!("unexpected byte {b:#04x} in bitmap"))),
            }
        }
    }
    Ok(image)
}

fn next_byte(r: &mut impl BufRead) -> Result<Option<u8>> {
    let mut byte = [0u8; 1];
    match r.read_exact(&mut byte) {
        Ok(()) => Ok(Some(byte[0])),
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn skip_comment_line(r: &mut impl BufRead) -> Result<()> {
    while let Some(b) = next_byte(r)? {
        if b == b'\n' {
            break;
        }
    }
    Ok(())
}

/// Reads one whitespace-separated positive integer, skipping # comments.
/// Consumes exactly one whitespace byte after the digits, as the raster
/// payload starts right behind it.
fn read_header_int(r: &mut impl BufRead) -> Result<u32> {
    let mut value: Option<u32> = None;
    loop {
        let Some(b) = next_byte(r)? else {
            return value.ok_or_else(|| Error::Format("bitmap header ended early".into()));
        };
        match b {
            b'0'..=b'9' => {
                let d = (b - b'0') as u32;
                value = Some(
                    value
                        .unwrap_or(0)
                        .checked_mul(10)
                        .and_then(|v| v.checked_add(d))
                        .ok_or_else(|| Error::Format("bitmap dimension overflow".into()))?,
                );
            }
            b'#' => skip_comment_line(r)?,
            b if b.is_ascii_whitespace() => {
                if let Some(v) = value {
                    return Ok(v);
                }
            }
            b => return Err(Error::Format(format!("unexpected byte {b:#04x} in header"))),
        }
    }
}

const CALIBRATION_HEADER: &str = "p,rho,box_size,seeds,mean,min,max,std_dev";

pub fn save_calibration(path: impl AsRef<Path>, entries: &[CalibrationEntry]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{CALIBRATION_HEADER}")?;
    for e in entries {
        let seeds = e
            .seeds
            .iter()
            .map(u64::to_string)
            .collect::<Vec<_>>()
            .join(";");
        let std_dev = e.std_dev.map(|s| s.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            e.p, e.rho, e.box_size, seeds, e.mean, e.min, e.max, std_dev
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_calibration(path: impl AsRef<Path>) -> Result<Vec<CalibrationEntry>> {
    let mut lines = BufReader::new(File::open(path)?).lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::Format("empty calibration file".into()))?;
    if header.trim() != CALIBRATION_HEADER {
        return Err(Error::Format(format!(
            "calibration header {header:?}, expected {CALIBRATION_HEADER:?}"
        )));
    }
    let mut entries = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(Error::Format(format!(
                "calibration row {} has {} fields",
                i + 1,
                fields.len()
            )));
        }
        let num = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| Error::Format(format!("bad number {v:?} in calibration row {}", i + 1)))
        };
        let seeds = if fields[3].is_empty() {
            Vec::new()
        } else {
            fields[3]
                .split(';')
                .map(|s| {
                    s.parse::<u64>()
                        .map_err(|_| Error::Format(format!("bad seed {s:?} in calibration row {}", i + 1)))
                })
                .collect::<Result<Vec<u64>>>()?
        };
        entries.push(CalibrationEntry {
            p: num(fields[0])?,
            rho: num(fields[1])?,
            box_size: fields[2]
                .parse()
                .map_err(|_| Error::Format(format!("bad box size in calibration row {}", i + 1)))?,
            seeds,
            mean: num(fields[4])?,
            min: num(fields[5])?,
            max: num(fields[6])?,
            std_dev: if fields[7].is_empty() {
                None
            } else {
                Some(num(fields[7])?)
            },
        });
    }
    Ok(entries)
}

const RESULTS_HEADER: &str = "p,gamma,seed,cade,e_hat_p,delta,clark_evans,n_particles,achieved_p";

pub fn save_results(path: impl AsRef<Path>, records: &[RunRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{RESULTS_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.p, r.gamma, r.seed, r.cade, r.e_hat_p, r.delta, r.clark_evans, r.n_particles, r.achieved_p
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_results(path: impl AsRef<Path>) -> Result<Vec<RunRecord>> {
    let mut lines = BufReader::new(File::open(path)?).lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::Format("empty results file".into()))?;
    if header.trim() != RESULTS_HEADER {
        return Err(Error::Format(format!(
            "results header {header:?}, expected {RESULTS_HEADER:?}"
        )));
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(Error::Format(format!(
                "results row {} has {} fields",
                i + 1,
                fields.len()
            )));
        }
        let num = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| Error::Format(format!("bad number {v:?} in results row {}", i + 1)))
        };
        let int = |v: &str| {
            v.parse::<u64>()
                .map_err(|_| Error::Format(format!("bad integer {v:?} in results row {}", i + 1)))
        };
        records.push(RunRecord {
            p: num(fields[0])?,
            gamma: num(fields[1])?,
            seed: int(fields[2])?,
            cade: int(fields[3])?,
            e_hat_p: num(fields[4])?,
            delta: num(fields[5])?,
            clark_evans: num(fields[6])?,
            n_particles: int(fields[7])? as usize,
            achieved_p: num(fields[8])?,
        });
    }
    Ok(records)
}

pub fn save_summary(path: impl AsRef<Path>, cells: &[SummaryCell]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "p,gamma,avg,max,min")?;
    for c in cells {
        writeln!(w, "{},{},{},{},{}", c.p, c.gamma, c.avg, c.max, c.min)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a thickening trace as `step,chi,area`.
pub fn save_trace(path: impl AsRef<Path>, trace: &EulerTrace) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "step,chi,area")?;
    for (i, (chi, area)) in trace.chis.iter().zip(&trace.areas).enumerate() {
        writeln!(w, "{i},{chi},{area}")?;
    }
    w.flush()?;
    Ok(())
}

/// One appended line per completed run, identifying what produced the
/// files next to it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub created_unix: u64,
    pub volume_fractions: Vec<f64>,
    pub gammas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub rho: f64,
    pub box_size: u32,
    pub schedule: String,
    pub connectivity: String,
    pub alpha: f64,
}

pub fn append_manifest(path: impl AsRef<Path>, manifest: &RunManifest) -> Result<()> {
    let mut w = OpenOptions::new().create(true).append(true).open(path)?;
    let line = serde_json::to_string(manifest)
        .map_err(|e| Error::Format(format!("manifest serialization: {e}")))?;
    writeln!(w, "{line}")?;
    Ok(())
}

pub fn read_manifests(path: impl AsRef<Path>) -> Result<Vec<RunManifest>> {
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::Format(format!("manifest line: {e}")))?,
        );
    }
    Ok(out)
}

/// Writes every table of a report under `dir` and appends the manifest.
/// Returns the paths written, manifest last.
pub fn write_report(dir: impl AsRef<Path>, bundle: &ReportBundle) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut emit = |name: &str, f: &dyn Fn(&Path) -> Result<()>| -> Result<()> {
        let path = dir.join(name);
        f(&path)?;
        written.push(path);
        Ok(())
    };
    emit("results.csv", &|p| save_results(p, &bundle.records))?;
    emit("calibration.csv", &|p| {
        save_calibration(p, &bundle.calibration)
    })?;
    emit("summary_cade.csv", &|p| save_summary(p, &bundle.cade_summary))?;
    emit("summary_delta.csv", &|p| {
        save_summary(p, &bundle.delta_summary)
    })?;
    emit("summary_clark_evans.csv", &|p| {
        save_summary(p, &bundle.clark_evans_summary)
    })?;
    emit("curve_cade_steps.csv", &|p| {
        let mut w = BufWriter::new(File::create(p)?);
        writeln!(w, "p,gamma,step,mean_cade")?;
        for c in &bundle.step_curves {
            writeln!(w, "{},{},{},{}", c.p, c.gamma, c.step, c.mean_cumulus)?;
        }
        w.flush()?;
        Ok(())
    })?;
    emit("curve_euler_radius.csv", &|p| {
        let mut w = BufWriter::new(File::create(p)?);
        writeln!(w, "p,gamma,r,chi,e,a,l")?;
        for c in &bundle.radius_curves {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                c.p, c.gamma, c.r, c.chi, c.euler_density, c.area_ratio, c.boundary_ratio
            )?;
        }
        w.flush()?;
        Ok(())
    })?;

    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        created_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        volume_fractions: bundle.spec.volume_fractions.clone(),
        gammas: bundle.spec.gammas.clone(),
        seeds: bundle.spec.seeds.clone(),
        rho: bundle.spec.rho,
        box_size: bundle.spec.box_size,
        schedule: bundle.spec.schedule.label().to_string(),
        connectivity: bundle.spec.connectivity.label().to_string(),
        alpha: bundle.spec.alpha,
    };
    let manifest_path = dir.join("manifest.jsonl");
    append_manifest(&manifest_path, &manifest)?;
    written.push(manifest_path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genesis::generate_configuration;

    fn roundtrip_config(config: &Configuration) -> Configuration {
        let mut buf = Vec::new();
        write_configuration(&mut buf, config).unwrap();
        read_configuration(&mut std::io::Cursor::new(buf)).unwrap()
    }

    #[test]
    fn configuration_roundtrip_exact() {
        let config = generate_configuration(0.4, 0.12, 4.0, 160, 21).unwrap();
        assert!(config.n_particles() > 10);
        assert_eq!(roundtrip_config(&config), config);
    }

    #[test]
    fn empty_configuration_roundtrips() {
        let config =
            Configuration::from_parts(Vec::new(), 8.0, 400, 0.2, 0.1, 3, 0.0).unwrap();
        assert_eq!(roundtrip_config(&config), config);
    }

    #[test]
    fn out_of_box_center_rejected() {
        let text = "# L=100 rho=5 gamma=0 p=0.1 seed=1 achieved_p=0.11\n150.0,20.0\n";
        let err = read_configuration(&mut std::io::Cursor::new(text)).unwrap_err();
        assert!(matches!(err, Error::Format(_)), "{err}");
    }

    #[test]
    fn malformed_headers_rejected() {
        for text in [
            "1.0,2.0\n",
            "# L=100 rho=5 gamma=0 p=0.1 seed=1\n",
            "# L=abc rho=5 gamma=0 p=0.1 seed=1 achieved_p=0.2\n",
            "# L=100 rho=5 gamma=0 p=0.1 seed=1 achieved_p=0.2 bogus=3\n",
        ] {
            assert!(read_configuration(&mut std::io::Cursor::new(text)).is_err(), "{text:?}");
        }
    }

    fn roundtrip_image(image: &BinaryImage, format: PbmFormat) -> BinaryImage {
        let mut buf = Vec::new();
        write_image(&mut buf, image, format).unwrap();
        read_image(&mut std::io::Cursor::new(buf)).unwrap()
    }

    #[test]
    fn tiny_images_roundtrip() {
        for on in [false, true] {
            let mut img = BinaryImage::new(1, 1);
            img.set(0, 0, on);
            assert_eq!(roundtrip_image(&img, PbmFormat::Plain), img);
            assert_eq!(roundtrip_image(&img, PbmFormat::Raw), img);
        }
    }

    #[test]
    fn ragged_width_roundtrips_in_both_formats() {
        let img = BinaryImage::from_fn(13, 5, |x, y| (x + 2 * y) % 3 == 0);
        assert_eq!(roundtrip_image(&img, PbmFormat::Plain), img);
        assert_eq!(roundtrip_image(&img, PbmFormat::Raw), img);
    }

    #[test]
    fn raw_rows_are_byte_padded_msb_first() {
        // 10 wide: each row must span ceil(10/8) = 2 bytes, pixel 0 in
        // the top bit of the first byte.
        let mut img = BinaryImage::new(10, 2);
        img.set(0, 0, true);
        img.set(9, 0, true);
        img.set(8, 1, true);
        let mut buf = Vec::new();
        write_image(&mut buf, &img, PbmFormat::Raw).unwrap();
        let body = &buf[buf.len() - 4..];
        assert_eq!(body, [0b1000_0000, 0b0100_0000, 0b0000_0000, 0b1000_0000]);
    }

    #[test]
    fn bitmap_errors() {
        assert!(read_image(&mut std::io::Cursor::new(b"P7\n2 2\n".to_vec())).is_err());
        assert!(read_image(&mut std::io::Cursor::new(b"P4\n8 2\n\xff".to_vec())).is_err());
        assert!(read_image(&mut std::io::Cursor::new(b"P1\n2 2\n101".to_vec())).is_err());
        assert!(read_image(&mut std::io::Cursor::new(b"P1\n0 2\n".to_vec())).is_err());
    }

    #[test]
    fn plain_parser_accepts_comments_and_whitespace() {
        let text = b"P1\n# a comment\n3 # widths\n2\n1 0 1\n0 1 0\n".to_vec();
        let img = read_image(&mut std::io::Cursor::new(text)).unwrap();
        assert_eq!(img.width(), 3);
        assert_eq!(img.height(), 2);
        assert!(img.get(0, 0) && img.get(2, 0) && img.get(1, 1));
        assert_eq!(img.foreground_count(), 3);
    }

    #[test]
    fn calibration_roundtrip() {
        let entries = vec![
            CalibrationEntry {
                p: 0.1,
                rho: 10.0,
                box_size: 2400,
                seeds: vec![1, 2, 3],
                mean: 805.7,
                min: 750.0,
                max: 879.0,
                std_dev: Some(41.25),
            },
            CalibrationEntry {
                p: 0.2,
                rho: 10.0,
                box_size: 2400,
                seeds: vec![7],
                mean: 2131.9,
                min: 2131.9,
                max: 2131.9,
                std_dev: None,
            },
        ];
        let dir = std::env::temp_dir().join("agglo-store-test-calibration.csv");
        save_calibration(&dir, &entries).unwrap();
        assert_eq!(load_calibration(&dir).unwrap(), entries);
        std::fs::remove_file(dir).ok();
    }

    #[test]
    fn results_roundtrip_and_schema_check() {
        let records = vec![RunRecord {
            p: 0.1,
            gamma: 0.3,
            seed: 4,
            cade: 582,
            e_hat_p: 805.7,
            delta: 0.33317,
            clark_evans: 0.755,
            n_particles: 1982,
            achieved_p: 0.10004,
        }];
        let path = std::env::temp_dir().join("agglo-store-test-results.csv");
        save_results(&path, &records).unwrap();
        assert_eq!(load_results(&path).unwrap(), records);
        std::fs::write(&path, "p,gamma,seed\n").unwrap();
        assert!(load_results(&path).is_err());
        std::fs::remove_file(path).ok();
    }
}
