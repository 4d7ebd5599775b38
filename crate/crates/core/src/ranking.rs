//! Statement-level rankings shared by every technique.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::gsa::{SiteKind, SiteTable};
use crate::lang::SiteId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Technique {
    Unival,
    Ochiai,
    Dstar,
    Baah,
    Esp,
    Predswitch,
}

impl Technique {
    pub const ALL: [Technique; 6] = [
        Technique::Unival,
        Technique::Ochiai,
        Technique::Dstar,
        Technique::Baah,
        Technique::Esp,
        Technique::Predswitch,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Technique::Unival => "unival",
            Technique::Ochiai => "ochiai",
            Technique::Dstar => "dstar",
            Technique::Baah => "baah",
            Technique::Esp => "esp",
            Technique::Predswitch => "predswitch",
        }
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Technique {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Technique::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| format!("unknown technique `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementKind {
    Predicate,
    Assignment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub line: u32,
    pub kind: ElementKind,
    pub score: f64,
    pub site_ids: Vec<SiteId>,
}

/// Entries sorted by descending score, ties by ascending line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub technique: Technique,
    pub entries: Vec<RankEntry>,
}

/// Which lines compete in a ranking.
#[derive(Debug, Clone, Copy, Default)]
pub struct Universe {
    pub include_phi: bool,
    pub predicates_only: bool,
}

impl Ranking {
    /// Groups site scores by source line; a line scores the maximum of its
    /// sites. Lines without a scored site get 0. Parameter sites never form
    /// elements.
    pub fn from_site_scores(
        technique: Technique,
        table: &SiteTable,
        scores: &BTreeMap<SiteId, f64>,
        universe: Universe,
    ) -> Ranking {
        let mut lines: BTreeMap<u32, (bool, Vec<SiteId>)> = BTreeMap::new();
        for s in table.iter() {
            let eligible = match s.kind {
                SiteKind::Param => false,
                SiteKind::Phi => universe.include_phi,
                SiteKind::Assignment | SiteKind::Predicate => true,
            };
            if !eligible {
                continue;
            }
            let e = lines.entry(s.line).or_default();
            e.0 |= s.kind == SiteKind::Predicate;
            e.1.push(s.id);
        }
        let mut entries: Vec<RankEntry> = lines
            .into_iter()
            .filter(|(_, (is_pred, _))| *is_pred || !universe.predicates_only)
            .map(|(line, (is_pred, site_ids))| {
                let score = site_ids
                    .iter()
                    .filter_map(|s| scores.get(s))
                    .copied()
                    .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| a.max(x))))
                    .unwrap_or(0.0);
                RankEntry {
                    line,
                    kind: if is_pred {
                        ElementKind::Predicate
                    } else {
                        ElementKind::Assignment
                    },
                    score,
                    site_ids,
                }
            })
            .collect();
        sort_entries(&mut entries);
        Ranking { technique, entries }
    }

    pub fn lines(&self) -> BTreeSet<u32> {
        self.entries.iter().map(|e| e.line).collect()
    }

    pub fn entry(&self, line: u32) -> Option<&RankEntry> {
        self.entries.iter().find(|e| e.line == line)
    }

    /// CSV with header `technique,line,kind,score,site_ids`; site ids are
    /// `;`-separated.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("technique,line,kind,score,site_ids\n");
        for e in &self.entries {
            let ids: Vec<String> = e.site_ids.iter().map(|s| s.to_string()).collect();
            let kind = match e.kind {
                ElementKind::Predicate => "predicate",
                ElementKind::Assignment => "assignment",
            };
            out.push_str(&format!("{},{},{},{:?},{}\n", self.technique, e.line, kind, e.score, ids.join(";")));
        }
        out
    }
}

pub(crate) fn sort_entries(entries: &mut [RankEntry]) {
    entries.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.line.cmp(&b.line)));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::prepare;

    #[test]
    fn lines_take_max_of_their_sites() {
        let ip = prepare("fn main(a: int, b: int) {\n if (a > 0 && b > 0) {\n  x = 1;\n }\n y = 2;\n}").unwrap();
        let id = |n: &str| ip.sites.by_name("main", n).unwrap().id;
        let scores = BTreeMap::from([(id("P1_1_1"), 0.2), (id("P1_2_1"), 0.7), (id("x_1"), 0.5)]);
        let r = Ranking::from_site_scores(Technique::Unival, &ip.sites, &scores, Universe::default());
        let got: Vec<_> = r.entries.iter().map(|e| (e.line, e.kind, e.score)).collect();
        assert_eq!(
            got,
            vec![(2, ElementKind::Predicate, 0.7), (3, ElementKind::Assignment, 0.5), (5, ElementKind::Assignment, 0.0)]
        );
        let preds = Ranking::from_site_scores(
            Technique::Predswitch,
            &ip.sites,
            &scores,
            Universe {
                predicates_only: true,
                ..Default::default()
            },
        );
        assert_eq!(preds.lines(), BTreeSet::from([2]));
        assert!(r.to_csv().starts_with("technique,line,kind,score,site_ids\nunival,2,predicate,0.7,"));
    }

    #[test]
    fn technique_names_round_trip() {
        for t in Technique::ALL {
            assert_eq!(t.name().parse::<Technique>().unwrap(), t);
        }
    }
}
