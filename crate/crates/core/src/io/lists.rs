//! Comma-separated id lists: triplets, ground-truth matches and pairs.

use crate::error::{Error, Result};
use crate::losses::{PairLabel, PairSample, TripletSample};

fn content_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            None
        } else {
            Some((i + 1, line.split(',').map(str::trim).collect()))
        }
    })
}

/// Lines of `anchor_id,positive_id,negative_id`; blank and `#` lines skipped.
pub fn parse_triplet_list(text: &str) -> Result<Vec<TripletSample>> {
    content_lines(text)
        .map(|(line, fields)| {
            if fields.len() != 3 || fields.iter().any(|f| f.is_empty()) {
                return Err(Error::Line {
                    line,
                    message: format!("expected anchor,positive,negative; got {} fields", fields.len()),
                });
            }
            TripletSample::new(fields[0], fields[1], fields[2]).map_err(|e| Error::Line {
                line,
                message: e.to_string(),
            })
        })
        .collect()
}

/// One query and the catalog ids that count as a correct retrieval.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundTruth {
    pub query_id: String,
    pub match_ids: Vec<String>,
}

/// Lines of `query_id,match_id[,match_id...]`.
pub fn parse_ground_truth(text: &str) -> Result<Vec<GroundTruth>> {
    content_lines(text)
        .map(|(line, fields)| {
            if fields.len() < 2 || fields.iter().any(|f| f.is_empty()) {
                return Err(Error::Line {
                    line,
                    message: "expected query_id,match_id[,match_id...]".into(),
                });
            }
            Ok(GroundTruth {
                query_id: fields[0].to_string(),
                match_ids: fields[1..].iter().map(|s| s.to_string()).collect(),
            })
        })
        .collect()
}

/// Lines of `query_id,candidate_id,label` with label `0` or `1`.
pub fn parse_pair_lines(text: &str) -> Result<Vec<PairSample>> {
    content_lines(text)
        .map(|(line, fields)| {
            let bad = |message: String| Error::Line { line, message };
            if fields.len() != 3 {
                return Err(bad(format!("expected 3 fields, got {}", fields.len())));
            }
            let y: u8 = fields[2].parse().map_err(|_| bad(format!("bad label `{}`", fields[2])))?;
            let label = PairLabel::from_y(y).map_err(|e| bad(e.to_string()))?;
            let mut p = PairSample::new(fields[0], fields[1], label);
            p.augmented_self = fields[0] == fields[1];
            Ok(p)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets() {
        let t = parse_triplet_list("a,b,c").unwrap();
        assert_eq!(t, vec![TripletSample::new("a", "b", "c").unwrap()]);
        let t = parse_triplet_list("# header\n\n q1, p1 ,n1\n\nq2,p2,n2\n").unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].positive_id, "p1");
        match parse_triplet_list("a,b,c\na,b") {
            Err(Error::Line { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(parse_triplet_list("a,a,c").is_err());
    }

    #[test]
    fn ground_truth() {
        let g = parse_ground_truth("q,m1,m2\n# c\nr,s").unwrap();
        assert_eq!(g[0].match_ids, ["m1", "m2"]);
        assert_eq!(g[1].query_id, "r");
        assert!(parse_ground_truth("lonely").is_err());
    }

    #[test]
    fn pairs() {
        let p = parse_pair_lines("a,b,0\nc,d,1").unwrap();
        assert_eq!(p[1].label, PairLabel::Dissimilar);
        assert!(parse_pair_lines("a,b,2").is_err());
    }
}
