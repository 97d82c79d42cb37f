//! Detection-count tables: the interchange format between the simulator and
//! the analysis stack.
//!
//! JSON form:
//!
//! ```json
//! {"link": "AB", "entries": [
//!   {"intensity": ["u", "v"], "basis": "X", "sent": 1000, "detected": 12, "errors": 3}
//! ]}
//! ```
//!
//! CSV form, one entry per row, pairs written as `u/v`:
//!
//! ```text
//! link,intensity,basis,sent,detected,errors
//! AB,u/v,X,1000,12,3
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Link {
    AB,
    AC,
    BC,
}

impl Link {
    pub fn mode(self) -> Mode {
        match self {
            Link::AB => Mode::Mdi,
            Link::AC | Link::BC => Mode::Qkd,
        }
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Link::AB => "AB",
            Link::AC => "AC",
            Link::BC => "BC",
        };
        f.write_str(s)
    }
}

impl FromStr for Link {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "AB" => Ok(Link::AB),
            "AC" => Ok(Link::AC),
            "BC" => Ok(Link::BC),
            other => Err(Error::Config(format!("unknown link {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "QKD")]
    Qkd,
    #[serde(rename = "MDI")]
    Mdi,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Qkd => "QKD",
            Mode::Mdi => "MDI",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "QKD" => Ok(Mode::Qkd),
            "MDI" => Ok(Mode::Mdi),
            other => Err(Error::Config(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Basis {
    Z,
    X,
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Basis::Z => "Z",
            Basis::X => "X",
        })
    }
}

/// Intensity class: signal, two decoys and vacuum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    S,
    U,
    V,
    W,
}

impl Label {
    pub const DECOYS: [Label; 3] = [Label::U, Label::V, Label::W];

    /// Basis in which this class is prepared.
    pub fn basis(self) -> Basis {
        match self {
            Label::S => Basis::Z,
            _ => Basis::X,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::S => "s",
            Label::U => "u",
            Label::V => "v",
            Label::W => "w",
        })
    }
}

impl FromStr for Label {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "s" => Ok(Label::S),
            "u" => Ok(Label::U),
            "v" => Ok(Label::V),
            "w" => Ok(Label::W),
            other => Err(Error::Config(format!("unknown intensity label {other:?}"))),
        }
    }
}

/// One sender's class (QKD) or an ordered (Alice, Bob) pair (MDI).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Intensity {
    Single(Label),
    Pair(Label, Label),
}

impl fmt::Display for Intensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Intensity::Single(l) => write!(f, "{l}"),
            Intensity::Pair(a, b) => write!(f, "{a}/{b}"),
        }
    }
}

impl FromStr for Intensity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once('/') {
            Some((a, b)) => Ok(Intensity::Pair(a.parse()?, b.parse()?)),
            None => Ok(Intensity::Single(s.parse()?)),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRecord {
    pub sent: u64,
    pub detected: u64,
    pub errors: u64,
}

impl CountRecord {
    pub fn new(sent: u64, detected: u64, errors: u64) -> Result<Self> {
        let r = CountRecord {
            sent,
            detected,
            errors,
        };
        r.check()?;
        Ok(r)
    }

    pub fn check(&self) -> Result<()> {
        if self.errors > self.detected || self.detected > self.sent {
            return Err(Error::Domain(format!(
                "count record violates errors <= detected <= sent: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn gain(&self) -> f64 {
        if self.sent == 0 {
            0.0
        } else {
            self.detected as f64 / self.sent as f64
        }
    }

    pub fn qber(&self) -> f64 {
        if self.detected == 0 {
            0.0
        } else {
            self.errors as f64 / self.detected as f64
        }
    }

    pub fn merge(&mut self, other: CountRecord) {
        self.sent += other.sent;
        self.detected += other.detected;
        self.errors += other.errors;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTable {
    pub link: Link,
    entries: BTreeMap<(Intensity, Basis), CountRecord>,
}

impl CountTable {
    pub fn new(link: Link) -> Self {
        CountTable {
            link,
            entries: BTreeMap::new(),
        }
    }

    /// Checks that an entry key is admissible on this link: signal only in Z,
    /// decoys only in X, pairs on the MDI link and singles elsewhere.
    pub fn admissible(&self, intensity: Intensity, basis: Basis) -> Result<()> {
        let ok = match (self.link.mode(), intensity) {
            (Mode::Qkd, Intensity::Single(l)) => l.basis() == basis,
            (Mode::Mdi, Intensity::Pair(a, b)) => a.basis() == basis && b.basis() == basis,
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "entry ({intensity}, {basis}) is not admissible on link {}",
                self.link
            )))
        }
    }

    /// Adds a record, accumulating into an existing entry.
    pub fn record(&mut self, intensity: Intensity, basis: Basis, rec: CountRecord) -> Result<()> {
        self.admissible(intensity, basis)?;
        rec.check()?;
        self.entries
            .entry((intensity, basis))
            .or_default()
            .merge(rec);
        Ok(())
    }

    pub(crate) fn entry_mut(&mut self, intensity: Intensity, basis: Basis) -> &mut CountRecord {
        self.entries.entry((intensity, basis)).or_default()
    }

    pub fn get(&self, intensity: Intensity, basis: Basis) -> Option<&CountRecord> {
        self.entries.get(&(intensity, basis))
    }

    pub fn require(&self, intensity: Intensity, basis: Basis) -> Result<&CountRecord> {
        self.get(intensity, basis).ok_or_else(|| {
            Error::MissingEntry(format!("({intensity}, {basis}) on link {}", self.link))
        })
    }

    pub fn entries(&self) -> impl Iterator<Item = (Intensity, Basis, &CountRecord)> {
        self.entries.iter().map(|((i, b), r)| (*i, *b, r))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.values().all(|r| r.sent == 0)
    }

    pub fn total_sent(&self) -> u64 {
        self.entries.values().map(|r| r.sent).sum()
    }

    /// The signal entry from which key and signature bits are drawn.
    pub fn signal_key(&self) -> Intensity {
        match self.link.mode() {
            Mode::Qkd => Intensity::Single(Label::S),
            Mode::Mdi => Intensity::Pair(Label::S, Label::S),
        }
    }

    pub fn signal(&self) -> Result<&CountRecord> {
        self.require(self.signal_key(), Basis::Z)
    }

    /// Returns a copy with every count multiplied by `factor`.
    pub fn scaled(&self, factor: u64) -> CountTable {
        let mut t = self.clone();
        for r in t.entries.values_mut() {
            r.sent *= factor;
            r.detected *= factor;
            r.errors *= factor;
        }
        t
    }

    /// Every count divided by `parts` and rounded down: one of `parts`
    /// equal shares of the acquisition.
    pub fn divided(&self, parts: u64) -> CountTable {
        let parts = parts.max(1);
        let mut t = self.clone();
        for r in t.entries.values_mut() {
            r.sent /= parts;
            r.errors /= parts;
            r.detected = (r.detected / parts).max(r.errors);
        }
        t
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(e.to_string());
        out.write_record(["link", "intensity", "basis", "sent", "detected", "errors"])
            .map_err(io)?;
        for (i, b, r) in self.entries() {
            out.write_record([
                self.link.to_string(),
                i.to_string(),
                b.to_string(),
                r.sent.to_string(),
                r.detected.to_string(),
                r.errors.to_string(),
            ])
            .map_err(io)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    /// Reads the flat CSV form. Errors name the 1-based line of the offending
    /// row (the header is line 1).
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(r);
        let mut table: Option<CountTable> = None;
        for (idx, row) in reader.records().enumerate() {
            let line = idx + 2;
            let err = |reason: String| Error::Ingest { row: line, reason };
            let row = row.map_err(|e| err(e.to_string()))?;
            if row.len() != 6 {
                return Err(err(format!("expected 6 fields, found {}", row.len())));
            }
            let link: Link = row[0].parse().map_err(|e: Error| err(e.to_string()))?;
            let intensity: Intensity = row[1].parse().map_err(|e: Error| err(e.to_string()))?;
            let basis = match &row[2] {
                "Z" => Basis::Z,
                "X" => Basis::X,
                other => return Err(err(format!("unknown basis {other:?}"))),
            };
            let num = |i: usize, name: &str| -> Result<u64> {
                row[i]
                    .parse::<u64>()
                    .map_err(|e| err(format!("{name}: {e} ({:?})", &row[i])))
            };
            let rec = CountRecord {
                sent: num(3, "sent")?,
                detected: num(4, "detected")?,
                errors: num(5, "errors")?,
            };
            let t = table.get_or_insert_with(|| CountTable::new(link));
            if t.link != link {
                return Err(err(format!("link {link} differs from {}", t.link)));
            }
            t.record(intensity, basis, rec)
                .map_err(|e| err(e.to_string()))?;
        }
        table.ok_or(Error::Ingest {
            row: 1,
            reason: "no data rows".into(),
        })
    }
}

#[derive(Serialize, Deserialize)]
struct WireEntry {
    intensity: Intensity,
    basis: Basis,
    sent: u64,
    detected: u64,
    errors: u64,
}

#[derive(Serialize, Deserialize)]
struct WireTable {
    link: Link,
    entries: Vec<WireEntry>,
}

impl Serialize for CountTable {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        WireTable {
            link: self.link,
            entries: self
                .entries()
                .map(|(intensity, basis, r)| WireEntry {
                    intensity,
                    basis,
                    sent: r.sent,
                    detected: r.detected,
                    errors: r.errors,
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CountTable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = WireTable::deserialize(d)?;
        let mut t = CountTable::new(wire.link);
        for (i, e) in wire.entries.into_iter().enumerate() {
            let rec = CountRecord {
                sent: e.sent,
                detected: e.detected,
                errors: e.errors,
            };
            t.record(e.intensity, e.basis, rec)
                .map_err(|err| serde::de::Error::custom(format!("entry {i}: {err}")))?;
        }
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_mdi() -> CountTable {
        let mut t = CountTable::new(Link::AB);
        t.record(
            Intensity::Pair(Label::S, Label::S),
            Basis::Z,
            CountRecord::new(1000, 40, 1).unwrap(),
        )
        .unwrap();
        t.record(
            Intensity::Pair(Label::U, Label::W),
            Basis::X,
            CountRecord::new(500, 3, 1).unwrap(),
        )
        .unwrap();
        t
    }

    #[test]
    fn json_shape() {
        let t = sample_mdi();
        let v: serde_json::Value = serde_json::from_str(&t.to_json().unwrap()).unwrap();
        assert_eq!(v["link"], "AB");
        assert_eq!(v["entries"][0]["intensity"], serde_json::json!(["s", "s"]));
        assert_eq!(v["entries"][0]["basis"], "Z");
        assert_eq!(CountTable::from_json(&t.to_json().unwrap()).unwrap(), t);
    }

    #[test]
    fn qkd_single_labels_are_strings() {
        let json = r#"{"link":"AC","entries":[{"intensity":"s","basis":"Z","sent":10,"detected":2,"errors":0}]}"#;
        let t = CountTable::from_json(json).unwrap();
        assert_eq!(t.signal().unwrap().detected, 2);
    }

    #[test]
    fn basis_invariant_enforced() {
        let mut t = CountTable::new(Link::AC);
        let r = CountRecord::new(10, 1, 0).unwrap();
        assert!(t.record(Intensity::Single(Label::S), Basis::X, r).is_err());
        assert!(t.record(Intensity::Single(Label::U), Basis::Z, r).is_err());
        assert!(t
            .record(Intensity::Pair(Label::U, Label::U), Basis::X, r)
            .is_err());
        assert!(t.record(Intensity::Single(Label::W), Basis::X, r).is_ok());
    }

    #[test]
    fn record_ordering_invariant() {
        assert!(CountRecord::new(10, 11, 0).is_err());
        assert!(CountRecord::new(10, 5, 6).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let t = sample_mdi();
        let csv = t.to_csv().unwrap();
        assert!(csv.starts_with("link,intensity,basis,sent,detected,errors\n"));
        assert!(csv.contains("AB,u/w,X,500,3,1"));
        assert_eq!(CountTable::read_csv(csv.as_bytes()).unwrap(), t);
    }

    #[test]
    fn csv_error_names_row() {
        let csv = "link,intensity,basis,sent,detected,errors\nAC,s,Z,10,2,0\nAC,u,X,10,twelve,0\n";
        match CountTable::read_csv(csv.as_bytes()) {
            Err(Error::Ingest { row, reason }) => {
                assert_eq!(row, 3);
                assert!(reason.contains("detected"), "{reason}");
            }
            other => panic!("unexpected {other:?}"),
        }
        let csv = "link,intensity,basis,sent,detected,errors\nAC,s,Z,10,20,0\n";
        assert!(matches!(
            CountTable::read_csv(csv.as_bytes()),
            Err(Error::Ingest { row: 2, .. })
        ));
    }
}
