//! File formats shared by the library and the command-line tool.
//!
//! Count tensors are sparse triplet files. The CSV form starts with `# key=value`
//! metadata lines followed by a `slot,from,to,count` table with 1-based slots;
//! the JSON form carries the same fields. Profiles are wide CSV tables with one
//! row per prosumer-day and columns `s1..s48` in kWh. A clearness matrix uses
//! the triplet format with a single slot, always `1`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::data_model::{DayType, RowDiagnostic};
use crate::demand_chain::TransitionTensor;
use crate::solar_gen::{ClearnessMatrix, CI_STATES};
use crate::{Error, Result, SLOTS_PER_DAY};

const DEMAND_KIND: &str = "demand";
const CLEARNESS_KIND: &str = "clearness";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    /// `.json` is JSON, anything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TensorFile {
    kind: String,
    n_max: u32,
    day_type: DayType,
    source_population: usize,
    source_hash: u64,
    /// `[slot, from, to, count]`, 1-based slot.
    triplets: Vec<(usize, u32, u32, u64)>,
}

impl TensorFile {
    fn from_tensor(t: &TransitionTensor) -> Self {
        Self {
            kind: DEMAND_KIND.into(),
            n_max: t.n_max(),
            day_type: t.day_type(),
            source_population: t.source_population(),
            source_hash: t.source_hash(),
            triplets: t.triplets().map(|(k, f, to, c)| (k + 1, f, to, c)).collect(),
        }
    }

    fn into_tensor(self) -> Result<TransitionTensor> {
        if self.kind != DEMAND_KIND {
            return Err(Error::Schema(format!("expected a {DEMAND_KIND} tensor, found kind {}", self.kind)));
        }
        let mut t = TransitionTensor::empty(self.n_max, self.day_type);
        for (slot, from, to, count) in self.triplets {
            if !(1..=SLOTS_PER_DAY).contains(&slot) {
                return Err(Error::Schema(format!("slot {slot} outside 1..={SLOTS_PER_DAY}")));
            }
            t.add(slot - 1, from, to, count)?;
        }
        t.set_source(self.source_population, self.source_hash);
        Ok(t)
    }
}

fn header_metadata<R: BufRead>(reader: &mut R) -> Result<(Vec<(String, String)>, String)> {
    let mut meta = Vec::new();
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Err(Error::Schema("triplet file has no header row".into()));
        }
        let trimmed = line.trim();
        match trimmed.strip_prefix('#') {
            Some(kv) => {
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| Error::Schema(format!("malformed metadata line: {trimmed}")))?;
                meta.push((k.trim().to_string(), v.trim().to_string()));
            }
            None if trimmed.is_empty() => {}
            None => return Ok((meta, trimmed.to_string())),
        }
    }
}

fn meta_value<'a>(meta: &'a [(String, String)], key: &str) -> Result<&'a str> {
    meta.iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| Error::Schema(format!("missing metadata key {key}")))
}

fn parse_meta<T: std::str::FromStr>(meta: &[(String, String)], key: &str) -> Result<T> {
    let raw = meta_value(meta, key)?;
    raw.parse().map_err(|_| Error::Schema(format!("bad value for {key}: {raw}")))
}

fn parse_field<T: std::str::FromStr>(raw: &str, what: &str, line: usize) -> Result<T> {
    raw.trim().parse().map_err(|_| Error::Schema(format!("line {line}: bad {what} {raw:?}")))
}

pub fn write_tensor_csv<W: Write>(tensor: &TransitionTensor, mut out: W) -> Result<()> {
    writeln!(out, "# kind={DEMAND_KIND}")?;
    writeln!(out, "# n_max={}", tensor.n_max())?;
    writeln!(out, "# day_type={}", tensor.day_type())?;
    writeln!(out, "# population={}", tensor.source_population())?;
    writeln!(out, "# source_hash={}", tensor.source_hash())?;
    writeln!(out, "slot,from,to,count")?;
    for (k, from, to, c) in tensor.triplets() {
        writeln!(out, "{},{from},{to},{c}", k + 1)?;
    }
    Ok(())
}

pub fn read_tensor_csv<R: Read>(source: R) -> Result<TransitionTensor> {
    let mut reader = BufReader::new(source);
    let (meta, header) = header_metadata(&mut reader)?;
    let kind = meta_value(&meta, "kind")?;
    if kind != DEMAND_KIND {
        return Err(Error::Schema(format!("expected a {DEMAND_KIND} tensor, found kind {kind}")));
    }
    if header.replace(' ', "") != "slot,from,to,count" {
        return Err(Error::Schema(format!("unexpected triplet header: {header}")));
    }
    let mut file = TensorFile {
        kind: kind.to_string(),
        n_max: parse_meta(&meta, "n_max")?,
        day_type: parse_meta(&meta, "day_type")?,
        source_population: parse_meta(&meta, "population")?,
        source_hash: parse_meta(&meta, "source_hash")?,
        triplets: Vec::new(),
    };
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let n = i + meta.len() + 2;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(Error::Schema(format!("line {n}: expected 4 fields")));
        }
        file.triplets.push((
            parse_field(f[0], "slot", n)?,
            parse_field(f[1], "from state", n)?,
            parse_field(f[2], "to state", n)?,
            parse_field(f[3], "count", n)?,
        ));
    }
    file.into_tensor()
}

pub fn write_tensor_json<W: Write>(tensor: &TransitionTensor, out: W) -> Result<()> {
    write_json(&TensorFile::from_tensor(tensor), out)
}

pub fn read_tensor_json<R: Read>(source: R) -> Result<TransitionTensor> {
    serde_json::from_reader::<_, TensorFile>(BufReader::new(source))?.into_tensor()
}

pub fn save_tensor(tensor: &TransitionTensor, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    match Format::from_path(path) {
        Format::Csv => write_tensor_csv(tensor, &mut out)?,
        Format::Json => write_tensor_json(tensor, &mut out)?,
    }
    Ok(out.flush()?)
}

pub fn load_tensor(path: &Path) -> Result<TransitionTensor> {
    let file = File::open(path)?;
    match Format::from_path(path) {
        Format::Csv => read_tensor_csv(file),
        Format::Json => read_tensor_json(file),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ClearnessFile {
    kind: String,
    bandwidth: f64,
    /// `[from, to, count]`.
    triplets: Vec<(u8, u8, u64)>,
}

impl ClearnessFile {
    fn from_matrix(m: &ClearnessMatrix) -> Result<Self> {
        let bandwidth = m
            .bandwidth()
            .ok_or_else(|| Error::domain("only count-based CI matrices can be saved"))?;
        let triplets = m
            .counts()
            .iter()
            .enumerate()
            .flat_map(|(i, row)| {
                row.iter().enumerate().filter(|(_, &c)| c > 0).map(move |(j, &c)| (i as u8, j as u8, c))
            })
            .collect();
        Ok(Self { kind: CLEARNESS_KIND.into(), bandwidth, triplets })
    }

    fn into_matrix(self) -> Result<ClearnessMatrix> {
        if self.kind != CLEARNESS_KIND {
            return Err(Error::Schema(format!("expected a {CLEARNESS_KIND} matrix, found kind {}", self.kind)));
        }
        let mut counts = vec![vec![0u64; CI_STATES]; CI_STATES];
        for (from, to, c) in self.triplets {
            if from as usize >= CI_STATES || to as usize >= CI_STATES {
                return Err(Error::Schema(format!("CI state out of range: {from} -> {to}")));
            }
            counts[from as usize][to as usize] += c;
        }
        ClearnessMatrix::from_counts(counts, self.bandwidth)
    }
}

pub fn write_clearness_csv<W: Write>(matrix: &ClearnessMatrix, mut out: W) -> Result<()> {
    let file = ClearnessFile::from_matrix(matrix)?;
    writeln!(out, "# kind={CLEARNESS_KIND}")?;
    writeln!(out, "# bandwidth={}", file.bandwidth)?;
    writeln!(out, "slot,from,to,count")?;
    for (f, t, c) in file.triplets {
        writeln!(out, "1,{f},{t},{c}")?;
    }
    Ok(())
}

pub fn read_clearness_csv<R: Read>(source: R) -> Result<ClearnessMatrix> {
    let mut reader = BufReader::new(source);
    let (meta, header) = header_metadata(&mut reader)?;
    if header.replace(' ', "") != "slot,from,to,count" {
        return Err(Error::Schema(format!("unexpected CI header: {header}")));
    }
    let mut file = ClearnessFile {
        kind: meta_value(&meta, "kind")?.to_string(),
        bandwidth: parse_meta(&meta, "bandwidth")?,
        triplets: Vec::new(),
    };
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let n = i + meta.len() + 2;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 || f[0].trim() != "1" {
            return Err(Error::Schema(format!("line {n}: expected 1,from,to,count")));
        }
        file.triplets.push((parse_field(f[1], "from", n)?, parse_field(f[2], "to", n)?, parse_field(f[3], "count", n)?));
    }
    file.into_matrix()
}

pub fn save_clearness(matrix: &ClearnessMatrix, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    match Format::from_path(path) {
        Format::Csv => write_clearness_csv(matrix, &mut out)?,
        Format::Json => write_json(&ClearnessFile::from_matrix(matrix)?, &mut out)?,
    }
    Ok(out.flush()?)
}

pub fn load_clearness(path: &Path) -> Result<ClearnessMatrix> {
    let file = File::open(path)?;
    match Format::from_path(path) {
        Format::Csv => read_clearness_csv(file),
        Format::Json => serde_json::from_reader::<_, ClearnessFile>(BufReader::new(file))?.into_matrix(),
    }
}

/// One row of a profile table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRecord {
    pub prosumer_id: String,
    /// Date or day index, kept as written.
    pub day: String,
    pub kwh: Vec<f64>,
}

pub fn write_profiles_csv<W: Write>(records: &[ProfileRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["prosumer_id".to_string(), "day".to_string()];
    header.extend((1..=SLOTS_PER_DAY).map(|k| format!("s{k}")));
    w.write_record(&header)?;
    for r in records {
        if r.kwh.len() != SLOTS_PER_DAY {
            return Err(Error::domain(format!("profile {} / {} has {} slots", r.prosumer_id, r.day, r.kwh.len())));
        }
        let mut row = vec![r.prosumer_id.clone(), r.day.clone()];
        row.extend(r.kwh.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_profiles_csv<R: Read>(source: R) -> Result<Vec<ProfileRecord>> {
    let mut r = csv::Reader::from_reader(source);
    let headers = r.headers()?.clone();
    if headers.len() != SLOTS_PER_DAY + 2 || &headers[0] != "prosumer_id" || &headers[1] != "day" {
        return Err(Error::Schema("profile table needs prosumer_id,day,s1..s48".into()));
    }
    r.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec?;
            let line = i + 2;
            let kwh = (2..rec.len()).map(|j| parse_field(&rec[j], "energy", line)).collect::<Result<Vec<f64>>>()?;
            Ok(ProfileRecord { prosumer_id: rec[0].to_string(), day: rec[1].to_string(), kwh })
        })
        .collect()
}

pub fn write_diagnostics_csv<W: Write>(rows: &[RowDiagnostic], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["line", "reason"])?;
    for d in rows {
        w.write_record([d.line.to_string(), d.reason.clone()])?;
    }
    w.flush()?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize, W: Write>(value: &T, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_json(value, &mut out)?;
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::DailyProfile;
    use crate::demand_chain::build_tensor;
    use chrono::NaiveDate;

    fn tensor() -> TransitionTensor {
        let d = NaiveDate::from_ymd_opt(2024, 3, 4).unwrap();
        let a = DailyProfile::new("a", d, DayType::Weekday, (0..48).map(|k| 0.01 * (k % 5) as f64).collect()).unwrap();
        let b = DailyProfile::new("b", d, DayType::Weekday, vec![0.5; 48]).unwrap();
        build_tensor(&[a, b], DayType::Weekday, 700).unwrap()
    }

    #[test]
    fn tensor_csv_round_trip() {
        let t = tensor();
        let mut buf = Vec::new();
        write_tensor_csv(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# kind=demand\n# n_max=700\n# day_type=weekday\n# population=2\n"));
        assert!(text.contains("\nslot,from,to,count\n1,0,0,1\n"));
        assert_eq!(read_tensor_csv(&buf[..]).unwrap(), t);
    }

    #[test]
    fn tensor_json_round_trip() {
        let t = tensor();
        let mut buf = Vec::new();
        write_tensor_json(&t, &mut buf).unwrap();
        assert_eq!(read_tensor_json(&buf[..]).unwrap(), t);
    }

    #[test]
    fn tensor_csv_rejects_bad_input() {
        let base = "# kind=demand\n# n_max=10\n# day_type=weekday\n# population=1\n# source_hash=0\nslot,from,to,count\n";
        assert!(read_tensor_csv(format!("{base}0,1,1,1\n").as_bytes()).is_err());
        assert!(read_tensor_csv(format!("{base}1,11,1,1\n").as_bytes()).is_err());
        assert!(read_tensor_csv(format!("{base}1,1,x,1\n").as_bytes()).is_err());
        assert!(read_tensor_csv(base.replace("demand", "clearness").as_bytes()).is_err());
        assert!(read_tensor_csv(base.replace("# n_max=10\n", "").as_bytes()).is_err());
        assert!(read_tensor_csv(format!("{base}1,1,1,1\n").as_bytes()).is_ok());
    }

    #[test]
    fn clearness_round_trip() {
        let m = crate::solar_gen::build_ci_matrix(&[vec![Some(3), Some(90), Some(100), Some(100)]], 2.5).unwrap();
        let mut buf = Vec::new();
        write_clearness_csv(&m, &mut buf).unwrap();
        assert_eq!(read_clearness_csv(&buf[..]).unwrap(), m);
        assert!(write_clearness_csv(&ClearnessMatrix::forcing(100), Vec::new()).is_err());
    }

    #[test]
    fn profiles_round_trip() {
        let recs = vec![
            ProfileRecord { prosumer_id: "p1".into(), day: "1".into(), kwh: (0..48).map(|k| k as f64 * 0.013).collect() },
            ProfileRecord { prosumer_id: "p,2".into(), day: "2024-01-02".into(), kwh: vec![0.1; 48] },
        ];
        let mut buf = Vec::new();
        write_profiles_csv(&recs, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("prosumer_id,day,s1,s2,"));
        assert_eq!(read_profiles_csv(&buf[..]).unwrap(), recs);
        let short = [ProfileRecord { prosumer_id: "x".into(), day: "1".into(), kwh: vec![0.0; 3] }];
        assert!(write_profiles_csv(&short, Vec::new()).is_err());
    }
}
