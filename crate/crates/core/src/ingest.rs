//! Cast-vote-record parsing and ballot normalization.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::instance::{Ballot, ElectionInstance};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceFormat {
    SimpleCsv,
    NycExport,
    DominionJson,
    MultnomahCvr,
}

impl FromStr for SourceFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simple-csv" => Ok(SourceFormat::SimpleCsv),
            "nyc-export" => Ok(SourceFormat::NycExport),
            "dominion-json" => Ok(SourceFormat::DominionJson),
            "multnomah-cvr" => Ok(SourceFormat::MultnomahCvr),
            other => Err(Error::Schema(format!("unknown input format '{other}'"))),
        }
    }
}

/// A mark at one rank position, kept verbatim.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Mark {
    Candidate(String),
    WriteIn,
    /// Explicit overvote marker from the source.
    Overvote,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRecord {
    pub id: String,
    /// Rank position (from 1) to the marks there; more than one mark is an
    /// overvote.
    pub marks: BTreeMap<usize, Vec<Mark>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawBallotSet {
    pub records: Vec<RawRecord>,
    pub format: SourceFormat,
    pub declared_max_rank: Option<usize>,
    /// Physical ballots with no marks at all in the contest.
    pub blank_records: u64,
}

impl RawBallotSet {
    pub fn record_count(&self) -> u64 {
        self.records.len() as u64 + self.blank_records
    }

    /// Candidate names that appear in any mark, sorted.
    pub fn candidate_names(&self) -> Vec<String> {
        let mut names = BTreeSet::new();
        for r in &self.records {
            for marks in r.marks.values() {
                for m in marks {
                    if let Mark::Candidate(n) = m {
                        names.insert(n.clone());
                    }
                }
            }
        }
        names.into_iter().collect()
    }

    /// One record per ballot of an instance, ranks in order.
    pub fn from_instance(instance: &ElectionInstance) -> Self {
        let mut records = Vec::new();
        let mut blank = 0;
        for b in instance.ballots() {
            for i in 0..b.count {
                if b.ranking.is_empty() {
                    blank += 1;
                    continue;
                }
                let marks = b
                    .ranking
                    .iter()
                    .enumerate()
                    .map(|(p, &c)| (p + 1, vec![Mark::Candidate(instance.name(c).to_string())]))
                    .collect();
                records.push(RawRecord { id: format!("{}-{i}", records.len()), marks });
            }
        }
        RawBallotSet { records, format: SourceFormat::SimpleCsv, declared_max_rank: None, blank_records: blank }
    }
}

fn parse_err(locus: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse { locus: locus.into(), message: message.into() }
}

/// Classifies a cell's text.
fn cell_marks(text: &str) -> Vec<Mark> {
    let t = text.trim();
    if t.is_empty() {
        return Vec::new();
    }
    match t.to_ascii_lowercase().as_str() {
        "undervote" | "skipped" | "blank" => Vec::new(),
        "overvote" => vec![Mark::Overvote],
        "write-in" | "writein" | "write in" | "uwi" => vec![Mark::WriteIn],
        _ => t.split('|').map(str::trim).filter(|s| !s.is_empty()).map(|s| Mark::Candidate(s.to_string())).collect(),
    }
}

fn push_record(set: &mut RawBallotSet, id: String, marks: BTreeMap<usize, Vec<Mark>>) {
    if marks.is_empty() {
        set.blank_records += 1;
    } else {
        set.records.push(RawRecord { id, marks });
    }
}

/// Parses a cast-vote-record source.
pub fn parse_cvr(source: impl Read, format: SourceFormat) -> Result<RawBallotSet> {
    match format {
        SourceFormat::SimpleCsv => parse_simple_csv(source),
        SourceFormat::NycExport => parse_nyc(source),
        SourceFormat::DominionJson => parse_dominion(source),
        SourceFormat::MultnomahCvr => parse_multnomah(source),
    }
}

fn csv_reader(source: impl Read) -> csv::Reader<impl Read> {
    csv::ReaderBuilder::new().flexible(false).trim(csv::Trim::Headers).from_reader(source)
}

fn record_locus(pos: Option<&csv::Position>, fallback: usize) -> String {
    match pos {
        Some(p) => format!("line {}", p.line()),
        None => format!("record {fallback}"),
    }
}

fn read_row(reader: &mut csv::Reader<impl Read>, row: &mut csv::StringRecord, index: usize) -> Result<bool> {
    reader.read_record(row).map_err(|e| {
        let locus = record_locus(e.position(), index + 1);
        parse_err(locus, e.to_string())
    })
}

/// Header `rank1..rankN`, optionally with an `id` column. Several
/// candidates in one cell are separated by `|`.
fn parse_simple_csv(source: impl Read) -> Result<RawBallotSet> {
    let mut reader = csv_reader(source);
    let headers = reader.headers().map_err(|e| parse_err("line 1", e.to_string()))?.clone();
    let mut rank_cols = Vec::new();
    let mut id_col = None;
    for (i, h) in headers.iter().enumerate() {
        let lower = h.to_ascii_lowercase();
        if let Some(n) = lower.strip_prefix("rank") {
            let n: usize = n.parse().map_err(|_| Error::Schema(format!("bad rank column '{h}'")))?;
            if n == 0 {
                return Err(Error::Schema(format!("rank column '{h}' must start at 1")));
            }
            rank_cols.push((i, n));
        } else if lower == "id" || lower == "ballot_id" {
            id_col = Some(i);
        } else {
            return Err(Error::Schema(format!("unknown column '{h}'")));
        }
    }
    if rank_cols.is_empty() {
        return Err(Error::Schema("no rank columns".into()));
    }
    let max_rank = rank_cols.iter().map(|(_, n)| *n).max();
    let mut set = RawBallotSet {
        records: Vec::new(),
        format: SourceFormat::SimpleCsv,
        declared_max_rank: max_rank,
        blank_records: 0,
    };
    let mut row = csv::StringRecord::new();
    let mut index = 0;
    while read_row(&mut reader, &mut row, index)? {
        index += 1;
        let mut marks: BTreeMap<usize, Vec<Mark>> = BTreeMap::new();
        for &(col, rank) in &rank_cols {
            let m = cell_marks(row.get(col).unwrap_or(""));
            if !m.is_empty() {
                marks.entry(rank).or_default().extend(m);
            }
        }
        let id = id_col.and_then(|c| row.get(c)).map(str::to_string).unwrap_or_else(|| index.to_string());
        push_record(&mut set, id, marks);
    }
    Ok(set)
}

/// Splits a `... Choice N of M ...` header into contest, rank and maximum.
fn nyc_choice(header: &str) -> Option<(String, usize, usize)> {
    let at = header.find("Choice ")?;
    let rest = &header[at + 7..];
    let (rank, rest) = rest.split_once(" of ")?;
    let max: String = rest.chars().take_while(|c| c.is_ascii_digit()).collect();
    let contest = format!("{}{}", header[..at].trim(), rest[max.len()..].trim_end());
    Some((contest.trim().to_string(), rank.trim().parse().ok()?, max.parse().ok()?))
}

/// NYC Board of Elections export: one column per `Choice N of M` and
/// free-form metadata columns. Only one contest may be present.
fn parse_nyc(source: impl Read) -> Result<RawBallotSet> {
    let mut reader = csv_reader(source);
    let headers = reader.headers().map_err(|e| parse_err("line 1", e.to_string()))?.clone();
    let mut rank_cols = Vec::new();
    let mut contests = BTreeSet::new();
    let mut declared = None;
    let mut id_col = None;
    for (i, h) in headers.iter().enumerate() {
        if let Some((contest, rank, max)) = nyc_choice(h) {
            contests.insert(contest);
            declared = Some(declared.map_or(max, |d: usize| d.max(max)));
            rank_cols.push((i, rank));
        } else if h.eq_ignore_ascii_case("Cast Vote Record") {
            id_col = Some(i);
        }
    }
    if rank_cols.is_empty() {
        return Err(Error::Schema("no 'Choice N of M' columns".into()));
    }
    if contests.len() > 1 {
        return Err(Error::Schema(format!("{} contests in one export; split the file first", contests.len())));
    }
    let mut set = RawBallotSet {
        records: Vec::new(),
        format: SourceFormat::NycExport,
        declared_max_rank: declared,
        blank_records: 0,
    };
    let mut row = csv::StringRecord::new();
    let mut index = 0;
    while read_row(&mut reader, &mut row, index)? {
        index += 1;
        let mut marks: BTreeMap<usize, Vec<Mark>> = BTreeMap::new();
        for &(col, rank) in &rank_cols {
            let m = cell_marks(row.get(col).unwrap_or(""));
            if !m.is_empty() {
                marks.entry(rank).or_default().extend(m);
            }
        }
        let id = id_col.and_then(|c| row.get(c)).map(str::to_string).unwrap_or_else(|| index.to_string());
        push_record(&mut set, id, marks);
    }
    Ok(set)
}

/// Multnomah County export: metadata columns without a colon, and one 0/1
/// column per candidate and rank, either `Candidate:Rank` or the long form
/// `Choice_ID:Contest:Rank:Seats:Candidate:Party`.
fn parse_multnomah(source: impl Read) -> Result<RawBallotSet> {
    let mut reader = csv_reader(source);
    let headers = reader.headers().map_err(|e| parse_err("line 1", e.to_string()))?.clone();
    let mut mark_cols: Vec<(usize, usize, Mark)> = Vec::new();
    let mut id_col = None;
    for (i, h) in headers.iter().enumerate() {
        if !h.contains(':') {
            if h.eq_ignore_ascii_case("BallotID") || h.eq_ignore_ascii_case("id") {
                id_col = Some(i);
            }
            continue;
        }
        let parts: Vec<&str> = h.split(':').map(str::trim).collect();
        let (name, rank) = match parts.len() {
            2 => (parts[0], parts[1]),
            n if n >= 5 => (parts[4], parts[2]),
            _ => return Err(Error::Schema(format!("unknown candidate column '{h}'"))),
        };
        let rank: usize = rank
            .parse()
            .ok()
            .filter(|&r| r > 0)
            .ok_or_else(|| Error::Schema(format!("unknown candidate column '{h}'")))?;
        if name.is_empty() {
            return Err(Error::Schema(format!("unknown candidate column '{h}'")));
        }
        let mark = match cell_marks(name).as_slice() {
            [Mark::WriteIn] => Mark::WriteIn,
            _ => Mark::Candidate(name.to_string()),
        };
        mark_cols.push((i, rank, mark));
    }
    if mark_cols.is_empty() {
        return Err(Error::Schema("no candidate:rank columns".into()));
    }
    let declared = mark_cols.iter().map(|(_, r, _)| *r).max();
    let mut set = RawBallotSet {
        records: Vec::new(),
        format: SourceFormat::MultnomahCvr,
        declared_max_rank: declared,
        blank_records: 0,
    };
    let mut row = csv::StringRecord::new();
    let mut index = 0;
    while read_row(&mut reader, &mut row, index)? {
        index += 1;
        let locus = record_locus(row.position(), index);
        let mut marks: BTreeMap<usize, Vec<Mark>> = BTreeMap::new();
        for (col, rank, mark) in &mark_cols {
            match row.get(*col).unwrap_or("").trim() {
                "" | "0" => {}
                "1" => marks.entry(*rank).or_default().push(mark.clone()),
                other => return Err(parse_err(locus, format!("mark value '{other}' is not 0 or 1"))),
            }
        }
        let id = id_col.and_then(|c| row.get(c)).map(str::to_string).unwrap_or_else(|| index.to_string());
        push_record(&mut set, id, marks);
    }
    Ok(set)
}

/// Dominion CVR export JSON. Candidate names come from an embedded
/// `CandidateManifest` when present, otherwise the candidate ids are used.
/// The corrected (`Modified`) side of a session wins over `Original`.
fn parse_dominion(mut source: impl Read) -> Result<RawBallotSet> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| parse_err(format!("line {}", e.line()), e.to_string()))?;
    let mut names: BTreeMap<String, String> = BTreeMap::new();
    let mut write_ins: BTreeSet<String> = BTreeSet::new();
    if let Some(list) = doc.pointer("/CandidateManifest/List").and_then(Value::as_array) {
        for c in list {
            let id = json_id(c.get("Id")).ok_or_else(|| Error::Schema("candidate without Id".into()))?;
            let desc = c.get("Description").and_then(Value::as_str).unwrap_or(&id).to_string();
            if c.get("Type").and_then(Value::as_str) == Some("WriteIn") {
                write_ins.insert(id.clone());
            }
            names.insert(id, desc);
        }
    }
    let sessions =
        doc.get("Sessions").and_then(Value::as_array).ok_or_else(|| Error::Schema("missing Sessions array".into()))?;
    let mut set = RawBallotSet {
        records: Vec::new(),
        format: SourceFormat::DominionJson,
        declared_max_rank: None,
        blank_records: 0,
    };
    let mut contest: Option<String> = None;
    for (i, session) in sessions.iter().enumerate() {
        let locus = format!("session {}", i + 1);
        let side = session
            .get("Modified")
            .filter(|v| !v.is_null())
            .or_else(|| session.get("Original"))
            .ok_or_else(|| parse_err(&locus, "session without Original"))?;
        let cards = side.get("Cards").and_then(Value::as_array).ok_or_else(|| parse_err(&locus, "missing Cards"))?;
        let mut marks: BTreeMap<usize, Vec<Mark>> = BTreeMap::new();
        for card in cards {
            let Some(contests) = card.get("Contests").and_then(Value::as_array) else {
                return Err(parse_err(&locus, "card without Contests"));
            };
            for c in contests {
                let id = json_id(c.get("Id")).ok_or_else(|| parse_err(&locus, "contest without Id"))?;
                match &contest {
                    None => contest = Some(id.clone()),
                    Some(first) if *first != id => {
                        return Err(Error::Schema("more than one contest in the export; split it first".into()))
                    }
                    _ => {}
                }
                let Some(list) = c.get("Marks").and_then(Value::as_array) else {
                    return Err(parse_err(&locus, "contest without Marks"));
                };
                for mark in list {
                    if mark.get("IsVote").and_then(Value::as_bool) == Some(false) {
                        continue;
                    }
                    let cand = json_id(mark.get("CandidateId"))
                        .ok_or_else(|| parse_err(&locus, "mark without CandidateId"))?;
                    let rank = mark
                        .get("Rank")
                        .and_then(Value::as_u64)
                        .filter(|&r| r > 0)
                        .ok_or_else(|| parse_err(&locus, "mark without a positive Rank"))?
                        as usize;
                    let m = if write_ins.contains(&cand) {
                        Mark::WriteIn
                    } else {
                        Mark::Candidate(names.get(&cand).cloned().unwrap_or(cand))
                    };
                    marks.entry(rank).or_default().push(m);
                }
            }
        }
        let id = json_id(session.get("RecordId")).unwrap_or_else(|| (i + 1).to_string());
        let tab = json_id(session.get("TabulatorId"));
        let batch = json_id(session.get("BatchId"));
        let id = match (tab, batch) {
            (Some(t), Some(b)) => format!("{t}-{b}-{id}"),
            _ => id,
        };
        push_record(&mut set, id, marks);
    }
    set.declared_max_rank = set.records.iter().filter_map(|r| r.marks.keys().max().copied()).max();
    Ok(set)
}

fn json_id(v: Option<&Value>) -> Option<String> {
    match v? {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DuplicateRule {
    #[default]
    KeepFirst,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OvervoteRule {
    #[default]
    TruncateAtOvervote,
    SkipPosition,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SkippedRankRule {
    #[default]
    Compress,
    TruncateAfterTwoSkips,
}

#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WriteInRule {
    #[default]
    Drop,
    /// Count write-ins for a pseudo-candidate of this name.
    Candidate(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NormalizationPolicy {
    pub duplicate_rule: DuplicateRule,
    pub overvote_rule: OvervoteRule,
    pub skipped_rank_rule: SkippedRankRule,
    pub max_rank: Option<usize>,
    pub write_in: WriteInRule,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizationReport {
    pub records: u64,
    /// Ballots empty after normalization.
    pub discarded: u64,
    pub write_ins_dropped: u64,
    pub overvotes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalized {
    pub instance: ElectionInstance,
    pub report: NormalizationReport,
}

/// Roster for a ballot set: `tie_order` when given (it must cover every
/// marked candidate), otherwise the marked names alphabetically.
pub fn roster_for(
    raw: &RawBallotSet,
    policy: &NormalizationPolicy,
    tie_order: Option<&[String]>,
) -> Result<Vec<String>> {
    let mut seen = raw.candidate_names();
    if let WriteInRule::Candidate(name) = &policy.write_in {
        let has_write_ins = raw.records.iter().any(|r| r.marks.values().any(|m| m.contains(&Mark::WriteIn)));
        if has_write_ins && !seen.contains(name) {
            seen.push(name.clone());
            seen.sort();
        }
    }
    match tie_order {
        None => Ok(seen),
        Some(order) => {
            if let Some(missing) = seen.iter().find(|n| !order.contains(n)) {
                return Err(Error::Schema(format!("tie order does not list '{missing}'")));
            }
            Ok(order.to_vec())
        }
    }
}

enum Slot {
    Skip,
    Over,
    Pick(usize),
}

/// Applies the policy to every record and merges identical rankings.
pub fn normalize_ballots(
    raw: &RawBallotSet,
    policy: &NormalizationPolicy,
    roster: &[String],
    seats: usize,
) -> Result<Normalized> {
    if policy.max_rank == Some(0) {
        return Err(Error::Domain("max_rank must be at least 1".into()));
    }
    let index: BTreeMap<&str, usize> = roster.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let lookup = |name: &str| {
        index.get(name).copied().ok_or_else(|| Error::Schema(format!("candidate '{name}' is not on the roster")))
    };
    let mut merged: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
    let mut report = NormalizationReport {
        records: raw.record_count(),
        discarded: raw.blank_records,
        write_ins_dropped: 0,
        overvotes: 0,
    };
    for record in &raw.records {
        let last = record.marks.keys().max().copied().unwrap_or(0);
        let mut ranking: Vec<usize> = Vec::new();
        let mut skips = 0;
        for pos in 1..=last {
            let marks = record.marks.get(&pos).map(Vec::as_slice).unwrap_or(&[]);
            let mut distinct: Vec<&Mark> = Vec::new();
            for m in marks {
                if !distinct.contains(&m) {
                    distinct.push(m);
                }
            }
            let slot = match distinct.as_slice() {
                [] => Slot::Skip,
                [Mark::Overvote] => Slot::Over,
                [_, _, ..] => Slot::Over,
                [Mark::WriteIn] => match &policy.write_in {
                    WriteInRule::Drop => {
                        report.write_ins_dropped += 1;
                        Slot::Skip
                    }
                    WriteInRule::Candidate(name) => Slot::Pick(lookup(name)?),
                },
                [Mark::Candidate(name)] => Slot::Pick(lookup(name)?),
            };
            let slot = match slot {
                Slot::Pick(c) if ranking.contains(&c) => Slot::Skip,
                other => other,
            };
            match slot {
                Slot::Pick(c) => {
                    skips = 0;
                    ranking.push(c);
                }
                Slot::Over => {
                    report.overvotes += 1;
                    match policy.overvote_rule {
                        OvervoteRule::TruncateAtOvervote => break,
                        OvervoteRule::SkipPosition => skips += 1,
                    }
                }
                Slot::Skip => skips += 1,
            }
            if policy.skipped_rank_rule == SkippedRankRule::TruncateAfterTwoSkips && skips >= 2 {
                break;
            }
        }
        if let Some(limit) = policy.max_rank {
            ranking.truncate(limit);
        }
        if ranking.is_empty() {
            report.discarded += 1;
        } else {
            *merged.entry(ranking).or_insert(0) += 1;
        }
    }
    let ballots = merged.into_iter().map(|(r, n)| Ballot::new(r, n)).collect();
    let instance = ElectionInstance::new(roster.to_vec(), ballots, seats)?;
    Ok(Normalized { instance, report })
}

/// Canonical ballot file: `ranking` (names joined by `>`) and `count`.
pub fn write_canonical(instance: &ElectionInstance) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["ranking", "count"])?;
    for b in instance.ballots() {
        let names: Vec<&str> = b.ranking.iter().map(|&c| instance.name(c)).collect();
        w.write_record([names.join(">"), b.count.to_string()])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Domain(e.to_string()))
}

/// Reads a canonical ballot file. Empty rankings stay as exhausted ballots.
pub fn read_canonical(source: impl Read, tie_order: Option<&[String]>, seats: usize) -> Result<ElectionInstance> {
    let mut reader = csv_reader(source);
    let headers = reader.headers().map_err(|e| parse_err("line 1", e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["ranking", "count"] {
        return Err(Error::Schema("canonical file needs columns ranking,count".into()));
    }
    let mut rows: Vec<(Vec<String>, u64)> = Vec::new();
    let mut row = csv::StringRecord::new();
    let mut index = 0;
    while read_row(&mut reader, &mut row, index)? {
        index += 1;
        let locus = record_locus(row.position(), index);
        let ranking: Vec<String> =
            row[0].split('>').map(str::trim).filter(|s| !s.is_empty()).map(str::to_string).collect();
        let count: u64 = row[1].trim().parse().map_err(|_| parse_err(locus, format!("bad count '{}'", &row[1])))?;
        rows.push((ranking, count));
    }
    let mut seen: BTreeSet<String> = BTreeSet::new();
    for (r, _) in &rows {
        seen.extend(r.iter().cloned());
    }
    let roster: Vec<String> = match tie_order {
        Some(order) => {
            if let Some(missing) = seen.iter().find(|n| !order.contains(n)) {
                return Err(Error::Schema(format!("tie order does not list '{missing}'")));
            }
            order.to_vec()
        }
        None => seen.into_iter().collect(),
    };
    let index: BTreeMap<&str, usize> = roster.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let ballots =
        rows.iter().map(|(r, n)| Ballot::new(r.iter().map(|name| index[name.as_str()]).collect(), *n)).collect();
    ElectionInstance::new(roster, ballots, seats)
}
