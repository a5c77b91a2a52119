//! Unbalanced clustered gap-time data.

use crate::dvine::Status;
use crate::error::{Error, Result};

/// One subject: its observed gap times, of which only the last may be
/// right-censored.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub id: String,
    pub gaps: Vec<f64>,
    pub status: Status,
}

impl Cluster {
    pub fn new(id: impl Into<String>, gaps: Vec<f64>, status: Status) -> Result<Self> {
        let id = id.into();
        if gaps.is_empty() {
            return Err(Error::Invalid(format!("cluster '{id}' has no gaps")));
        }
        if let Some(g) = gaps.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
            return Err(Error::Invalid(format!("cluster '{id}' has a non-positive gap time {g}")));
        }
        Ok(Self { id, gaps, status })
    }

    pub fn size(&self) -> usize {
        self.gaps.len()
    }

    pub fn total_time(&self) -> f64 {
        self.gaps.iter().sum()
    }

    pub fn is_censored(&self) -> bool {
        self.status == Status::Censored
    }
}

/// Clusters ordered by decreasing size (stable within a size).
#[derive(Debug, Clone, PartialEq)]
pub struct GapDataset {
    clusters: Vec<Cluster>,
}

impl GapDataset {
    pub fn new(mut clusters: Vec<Cluster>) -> Result<Self> {
        if clusters.is_empty() {
            return Err(Error::Invalid("dataset has no clusters".into()));
        }
        clusters.sort_by_key(|c| std::cmp::Reverse(c.size()));
        Ok(Self { clusters })
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn n(&self) -> usize {
        self.clusters.len()
    }

    /// Largest cluster size d.
    pub fn max_size(&self) -> usize {
        self.clusters[0].size()
    }

    /// n_j for j = 1..=d (index j − 1).
    pub fn size_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.max_size()];
        for c in &self.clusters {
            counts[c.size() - 1] += 1;
        }
        counts
    }

    pub fn total_gaps(&self) -> usize {
        self.clusters.iter().map(|c| c.size()).sum()
    }

    pub fn n_censored(&self) -> usize {
        self.clusters.iter().filter(|c| c.is_censored()).count()
    }

    /// Censored gaps as a fraction of all observed gaps.
    pub fn censoring_rate(&self) -> f64 {
        self.n_censored() as f64 / self.total_gaps() as f64
    }

    /// Clusters of size ≥ j, cut to their first j gaps; a cut cluster's j-th
    /// gap was observed, so its status becomes Event.
    pub fn truncated(&self, j: usize) -> Option<Self> {
        let clusters: Vec<Cluster> = self
            .clusters
            .iter()
            .filter(|c| c.size() >= j)
            .map(|c| Cluster {
                id: c.id.clone(),
                gaps: c.gaps[..j].to_vec(),
                status: if c.size() > j { Status::Event } else { c.status },
            })
            .collect();
        if clusters.is_empty() {
            None
        } else {
            Some(Self { clusters })
        }
    }

    /// Total follow-up time of every cluster, in dataset order.
    pub fn total_times(&self) -> Vec<f64> {
        self.clusters.iter().map(|c| c.total_time()).collect()
    }

    pub fn statuses(&self) -> Vec<Status> {
        self.clusters.iter().map(|c| c.status).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds() -> GapDataset {
        GapDataset::new(vec![
            Cluster::new("a", vec![1.0, 2.0], Status::Censored).unwrap(),
            Cluster::new("b", vec![0.5], Status::Censored).unwrap(),
            Cluster::new("c", vec![1.0, 1.0, 3.0], Status::Event).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn ordering_and_counts() {
        let d = ds();
        assert_eq!(d.clusters()[0].id, "c");
        assert_eq!(d.clusters()[1].id, "a");
        assert_eq!(d.max_size(), 3);
        assert_eq!(d.size_counts(), vec![1, 1, 1]);
        assert_eq!(d.total_gaps(), 6);
        assert!((d.censoring_rate() - 2.0 / 6.0).abs() < 1e-15);
        assert_eq!(d.total_times(), vec![5.0, 3.0, 0.5]);
    }

    #[test]
    fn truncation() {
        let d = ds();
        let t = d.truncated(2).unwrap();
        assert_eq!(t.n(), 2);
        assert_eq!(t.clusters()[0].gaps, vec![1.0, 1.0]);
        assert_eq!(t.clusters()[0].status, Status::Event);
        assert_eq!(t.clusters()[1].status, Status::Censored);
        assert!(d.truncated(4).is_none());
    }

    #[test]
    fn validation() {
        assert!(Cluster::new("x", vec![], Status::Event).is_err());
        assert!(Cluster::new("x", vec![1.0, 0.0], Status::Event).is_err());
        assert!(Cluster::new("x", vec![1.0, f64::NAN], Status::Event).is_err());
        assert!(GapDataset::new(vec![]).is_err());
    }
}
