use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Dag;
use crate::error::{Error, Result};

/// `{"nodes": [...], "edges": [[parent, child], ...]}`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DagJson {
    pub nodes: Vec<String>,
    pub edges: Vec<[String; 2]>,
}

impl From<&Dag> for DagJson {
    fn from(d: &Dag) -> Self {
        DagJson {
            nodes: d.names().to_vec(),
            edges: d.edges().iter().map(|&(p, c)| [d.names()[p].clone(), d.names()[c].clone()]).collect(),
        }
    }
}

impl TryFrom<DagJson> for Dag {
    type Error = Error;
    fn try_from(j: DagJson) -> Result<Self> {
        let edges: Vec<(String, String)> = j.edges.into_iter().map(|[p, c]| (p, c)).collect();
        Dag::from_named_edges(j.nodes, &edges)
    }
}

impl Dag {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&DagJson::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str::<DagJson>(s)?.try_into()
    }

    pub fn to_edge_csv(&self) -> String {
        let mut out = String::from("parent,child\n");
        for (p, c) in self.edges() {
            out.push_str(&format!("{},{}\n", self.names()[p], self.names()[c]));
        }
        out
    }

    /// Load a graph file: `.json` uses [`DagJson`], anything else is an edge list over `names`.
    pub fn load(path: impl AsRef<Path>, names: &[String]) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
        if path.extension().is_some_and(|e| e == "json") {
            let dag = Self::from_json(&text)?;
            if dag.names().len() != names.len() || dag.names().iter().any(|n| !names.contains(n)) {
                return Err(Error::InvalidGraph("graph nodes do not match dataset features".into()));
            }
            dag.reordered(names)
        } else {
            let edges = parse_edge_list(&text, &path.display().to_string())?;
            Dag::from_named_edges(names.to_vec(), &edges)
        }
    }
}

/// Parse `parent,child` rows (header required).
pub fn parse_edge_list(text: &str, origin: &str) -> Result<Vec<(String, String)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Io { path: origin.into(), source: e.into() })?;
        if rec.len() != 2 {
            return Err(Error::RaggedRow { path: origin.into(), row: k + 2, found: rec.len(), expected: 2 });
        }
        out.push((rec[0].to_string(), rec[1].to_string()));
    }
    Ok(out)
}

pub fn read_edge_list(path: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
    parse_edge_list(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_and_csv_forms() {
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let d = Dag::new(names.clone(), &[(0, 1), (0, 2)]).unwrap();
        let j = d.to_json().unwrap();
        assert!(j.contains("\"nodes\""));
        assert_eq!(Dag::from_json(&j).unwrap(), d);
        let csv = d.to_edge_csv();
        assert_eq!(csv, "parent,child\na,b\na,c\n");
        let edges = parse_edge_list(&csv, "mem").unwrap();
        assert_eq!(Dag::from_named_edges(names, &edges).unwrap(), d);
    }
}
