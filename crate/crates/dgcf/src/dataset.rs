//! Interaction logs in the `user,item,timestamp,state_label,features...` CSV
//! layout, and the inline synthetic dataset syntax.

use std::collections::HashMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use dgcf_core::data::{DatasetMeta, SyntheticSpec};
use dgcf_core::store::Interaction;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    /// Sorted by `(time, seq)`; `seq` is the position in this vector.
    pub interactions: Vec<Interaction>,
    pub meta: DatasetMeta,
    /// Original id of each dense user index.
    pub user_ids: Vec<String>,
    pub item_ids: Vec<String>,
}

#[derive(Default)]
struct Dense {
    index: HashMap<String, usize>,
    ids: Vec<String>,
}

impl Dense {
    fn get(&mut self, raw: &str) -> usize {
        if let Some(&i) = self.index.get(raw) {
            return i;
        }
        let i = self.ids.len();
        self.index.insert(raw.to_owned(), i);
        self.ids.push(raw.to_owned());
        i
    }
}

pub fn parse_csv(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io { path: path.to_owned(), source })?;
    parse_csv_reader(file, path)
}

/// `origin` only labels error messages.
pub fn parse_csv_reader<R: Read>(reader: R, origin: &Path) -> Result<Dataset> {
    let parse_err = |line: u64, message: String| Error::Parse { path: PathBuf::from(origin), line, message };
    let mut csv = csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_reader(reader);
    let (mut users, mut items) = (Dense::default(), Dense::default());
    let mut rows: Vec<(f64, u64, Interaction)> = Vec::new();

    for record in csv.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, csv::Position::line);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, csv::Position::line);
        if record.len() < 3 {
            return Err(parse_err(line, format!("expected at least 3 columns, found {}", record.len())));
        }
        let number = |col: usize, what: &str| -> Result<f64> {
            let v: f64 = record[col].parse().map_err(|_| parse_err(line, format!("{what} `{}` is not a number", &record[col])))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("{what} is not finite")));
            }
            Ok(v)
        };
        let time = number(2, "timestamp")?;
        let features = (4..record.len()).map(|c| number(c, "feature")).collect::<Result<Vec<_>>>()?;
        let x = Interaction::new(0, users.get(&record[0]), items.get(&record[1]), time).with_features(features);
        rows.push((time, line, x));
    }

    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let interactions: Vec<Interaction> =
        rows.into_iter().enumerate().map(|(seq, (_, _, x))| Interaction { seq, ..x }).collect();
    let mut meta = DatasetMeta::of(&interactions);
    meta.num_users = users.ids.len();
    meta.num_items = items.ids.len();
    Ok(Dataset { interactions, meta, user_ids: users.ids, item_ids: items.ids })
}

/// `users:items:clusters:events:repeatprob`, e.g. `200:100:4:20000:0.1`.
pub fn parse_synthetic_spec(s: &str) -> Result<SyntheticSpec> {
    let bad = |m: &str| Error::config("synthetic", format!("`{s}`: {m}"));
    let parts: Vec<&str> = s.split(':').collect();
    let [users, items, clusters, events, repeat] = parts[..] else {
        return Err(bad("expected users:items:clusters:events:repeatprob"));
    };
    let count = |v: &str| v.trim().parse::<usize>().map_err(|_| bad("counts must be non-negative integers"));
    let spec = SyntheticSpec {
        users: count(users)?,
        items: count(items)?,
        clusters: count(clusters)?,
        events: count(events)?,
        repeat_prob: repeat.trim().parse().map_err(|_| bad("repeat probability must be a number"))?,
    };
    if spec.clusters == 0 || !spec.users.is_multiple_of(spec.clusters) || !spec.items.is_multiple_of(spec.clusters) || spec.users == 0 {
        return Err(bad("clusters must evenly divide users and items"));
    }
    if !(0.0..=1.0).contains(&spec.repeat_prob) {
        return Err(bad("repeat probability must lie in [0, 1]"));
    }
    Ok(spec)
}
