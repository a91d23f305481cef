use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{OrderingError, Permutation, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEntry {
    pub position: usize,
    pub source_index: usize,
    pub name: String,
}

/// On-disk record of a global ordering: the ordered features, the global
/// cost, the cluster weights and the configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationFile {
    pub features: Vec<FeatureEntry>,
    /// Weighted footrule (variance mode) or `F_G` (graph mode).
    pub cost: Option<f64>,
    pub cluster_weights: Vec<f64>,
    pub config: serde_json::Value,
}

impl PermutationFile {
    pub fn new(perm: &Permutation, names: &[String], cluster_weights: Vec<f64>, config: serde_json::Value) -> Result<Self> {
        perm.check_bijective(names.len())?;
        let features = perm
            .order()
            .iter()
            .enumerate()
            .map(|(position, &source_index)| FeatureEntry {
                position,
                source_index,
                name: names[source_index].clone(),
            })
            .collect();
        Ok(Self {
            features,
            cost: perm.cost(),
            cluster_weights,
            config,
        })
    }

    pub fn permutation(&self) -> Result<Permutation> {
        let p = Permutation::global(self.features.iter().map(|f| f.source_index).collect());
        p.check_bijective(self.features.len())?;
        Ok(match self.cost {
            Some(c) => p.with_cost(c),
            None => p,
        })
    }

    pub fn ordered_names(&self) -> Vec<&str> {
        self.features.iter().map(|f| f.name.as_str()).collect()
    }
}

pub fn write_permutation_file<W: Write>(file: &PermutationFile, mut w: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, file).map_err(|e| OrderingError::File(e.to_string()))?;
    w.write_all(b"\n").map_err(|e| OrderingError::File(e.to_string()))
}

pub fn read_permutation_file<R: Read>(r: R) -> Result<PermutationFile> {
    let f: PermutationFile = serde_json::from_reader(r).map_err(|e| OrderingError::File(e.to_string()))?;
    for (i, e) in f.features.iter().enumerate() {
        if e.position != i {
            return Err(OrderingError::File(format!("entry {i} claims position {}", e.position)));
        }
    }
    f.permutation()?;
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let p = Permutation::global(vec![2, 0, 1]).with_cost(0.1 + 0.2);
        let f = PermutationFile::new(&p, &names, vec![0.25, 0.75], serde_json::json!({"k": 2})).unwrap();
        let mut buf = Vec::new();
        write_permutation_file(&f, &mut buf).unwrap();
        let back = read_permutation_file(&buf[..]).unwrap();
        assert_eq!(back, f);
        assert_eq!(back.ordered_names(), vec!["c", "a", "b"]);
        assert_eq!(back.permutation().unwrap().cost(), Some(0.1 + 0.2));
    }

    #[test]
    fn corrupt_files_rejected() {
        let text = r#"{"features":[{"position":0,"source_index":0,"name":"a"},{"position":1,"source_index":0,"name":"b"}],
            "cost":null,"cluster_weights":[],"config":null}"#;
        assert!(read_permutation_file(text.as_bytes()).is_err());
        assert!(read_permutation_file(&b"not json"[..]).is_err());
    }
}
