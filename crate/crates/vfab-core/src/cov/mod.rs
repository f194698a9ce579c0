//! Functional coverage: named bins over sampled values, cross
//! products between points, and the accounting that makes a coverage
//! claim auditable: every sample either lands in exactly one bin or is
//! counted as uncovered.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::ipxact::CovPointSpec;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CovError {
    #[error("coverpoint {point}: bins {a} and {b} overlap")]
    OverlapBins { point: String, a: String, b: String },
    #[error("coverpoint {point}: duplicate bin name {bin}")]
    DupBin { point: String, bin: String },
    #[error("coverpoint {point} has no bins")]
    NoBins { point: String },
    #[error("group {group}: duplicate coverpoint {point}")]
    DupPoint { group: String, point: String },
    #[error("group {group}: no coverpoint named {name}")]
    UnknownPoint { group: String, name: String },
    #[error("bin {bin}: range {lo:#x}..{hi:#x} is inverted")]
    BadRange { bin: String, lo: u64, hi: u64 },
}

/// A named set of values, as a union of inclusive ranges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bin {
    pub name: String,
    pub ranges: Vec<(u64, u64)>,
}

impl Bin {
    pub fn value(name: &str, v: u64) -> Bin {
        Bin {
            name: name.to_string(),
            ranges: vec![(v, v)],
        }
    }

    pub fn range(name: &str, lo: u64, hi: u64) -> Bin {
        Bin {
            name: name.to_string(),
            ranges: vec![(lo, hi)],
        }
    }

    pub fn contains(&self, v: u64) -> bool {
        self.ranges.iter().any(|(lo, hi)| (*lo..=*hi).contains(&v))
    }

    fn validate(&self) -> Result<(), CovError> {
        for (lo, hi) in &self.ranges {
            if lo > hi {
                return Err(CovError::BadRange {
                    bin: self.name.clone(),
                    lo: *lo,
                    hi: *hi,
                });
            }
        }
        Ok(())
    }

    fn overlaps(&self, other: &Bin) -> bool {
        self.ranges.iter().any(|(alo, ahi)| {
            other
                .ranges
                .iter()
                .any(|(blo, bhi)| alo <= bhi && blo <= ahi)
        })
    }
}

/// One sampled expression with its bins and hit counts.
#[derive(Debug, Clone)]
pub struct CoverPoint {
    name: String,
    bins: Vec<Bin>,
    hits: Vec<u64>,
    uncovered: u64,
    samples: u64,
}

impl CoverPoint {
    pub fn new(name: &str, bins: Vec<Bin>) -> Result<CoverPoint, CovError> {
        if bins.is_empty() {
            return Err(CovError::NoBins {
                point: name.to_string(),
            });
        }
        for (i, b) in bins.iter().enumerate() {
            b.validate()?;
            for other in &bins[i + 1..] {
                if other.name == b.name {
                    return Err(CovError::DupBin {
                        point: name.to_string(),
                        bin: b.name.clone(),
                    });
                }
                if b.overlaps(other) {
                    return Err(CovError::OverlapBins {
                        point: name.to_string(),
                        a: b.name.clone(),
                        b: other.name.clone(),
                    });
                }
            }
        }
        let hits = vec![0; bins.len()];
        Ok(CoverPoint {
            name: name.to_string(),
            bins,
            hits,
            uncovered: 0,
            samples: 0,
        })
    }

    /// Default binning for a field of `width` bits: one bin per value
    /// up to 16 values, 16 equal ranges beyond that.
    pub fn auto(name: &str, width: u32) -> Result<CoverPoint, CovError> {
        if width == 0 || width > 32 {
            return Err(CovError::NoBins {
                point: name.to_string(),
            });
        }
        let n = 1u64 << width;
        let bins = if n <= 16 {
            (0..n).map(|v| Bin::value(&format!("v{v}"), v)).collect()
        } else {
            let chunk = n / 16;
            (0..16)
                .map(|k| Bin::range(&format!("r{k}"), k * chunk, (k + 1) * chunk - 1))
                .collect()
        };
        CoverPoint::new(name, bins)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Index of the bin containing `v`, if any. Disjointness makes
    /// this unambiguous.
    fn bin_of(&self, v: u64) -> Option<usize> {
        self.bins.iter().position(|b| b.contains(v))
    }

    fn sample(&mut self, v: u64) -> Option<usize> {
        self.samples += 1;
        match self.bin_of(v) {
            Some(i) => {
                self.hits[i] += 1;
                Some(i)
            }
            None => {
                self.uncovered += 1;
                None
            }
        }
    }

    pub fn bins(&self) -> &[Bin] {
        &self.bins
    }

    pub fn hit_counts(&self) -> &[u64] {
        &self.hits
    }

    pub fn hits_of(&self, bin: &str) -> Option<u64> {
        self.bins
            .iter()
            .position(|b| b.name == bin)
            .map(|i| self.hits[i])
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    pub fn uncovered(&self) -> u64 {
        self.uncovered
    }

    pub fn bins_hit(&self) -> usize {
        self.hits.iter().filter(|h| **h > 0).count()
    }

    /// Percentage of bins hit at least once.
    pub fn pct(&self) -> f64 {
        self.bins_hit() as f64 / self.bins.len() as f64 * 100.0
    }
}

#[derive(Debug, Clone)]
struct Cross {
    name: String,
    a: usize,
    b: usize,
    cells: BTreeMap<(usize, usize), u64>,
}

/// A group of coverpoints sampled together, plus optional crosses.
#[derive(Debug, Clone)]
pub struct CoverGroup {
    name: String,
    points: Vec<CoverPoint>,
    crosses: Vec<Cross>,
}

impl CoverGroup {
    pub fn new(name: &str) -> CoverGroup {
        CoverGroup {
            name: name.to_string(),
            points: Vec::new(),
            crosses: Vec::new(),
        }
    }

    /// Builds a group from the bundle's coverage skeleton, one
    /// auto-binned point per RW field.
    pub fn from_skeleton(name: &str, specs: &[CovPointSpec]) -> Result<CoverGroup, CovError> {
        let mut g = CoverGroup::new(name);
        for spec in specs {
            g.add_point(CoverPoint::auto(&spec.path, spec.width)?)?;
        }
        Ok(g)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn add_point(&mut self, point: CoverPoint) -> Result<(), CovError> {
        if self.points.iter().any(|p| p.name == point.name) {
            return Err(CovError::DupPoint {
                group: self.name.clone(),
                point: point.name,
            });
        }
        self.points.push(point);
        Ok(())
    }

    pub fn add_cross(&mut self, name: &str, a: &str, b: &str) -> Result<(), CovError> {
        let ai = self.index_of(a)?;
        let bi = self.index_of(b)?;
        self.crosses.push(Cross {
            name: name.to_string(),
            a: ai,
            b: bi,
            cells: BTreeMap::new(),
        });
        Ok(())
    }

    fn index_of(&self, name: &str) -> Result<usize, CovError> {
        self.points
            .iter()
            .position(|p| p.name == name)
            .ok_or_else(|| CovError::UnknownPoint {
                group: self.name.clone(),
                name: name.to_string(),
            })
    }

    /// Samples the named points with their values; crosses fire when
    /// both of their points landed in a bin during this call.
    pub fn sample(&mut self, values: &[(&str, u64)]) -> Result<(), CovError> {
        let mut landed: Vec<Option<usize>> = vec![None; self.points.len()];
        for (name, v) in values {
            let i = self.index_of(name)?;
            landed[i] = self.points[i].sample(*v);
        }
        for cross in &mut self.crosses {
            if let (Some(ba), Some(bb)) = (landed[cross.a], landed[cross.b]) {
                *cross.cells.entry((ba, bb)).or_insert(0) += 1;
            }
        }
        Ok(())
    }

    pub fn point(&self, name: &str) -> Option<&CoverPoint> {
        self.points.iter().find(|p| p.name == name)
    }

    pub fn points(&self) -> &[CoverPoint] {
        &self.points
    }

    /// Hit bins (and cross cells) over total, as a percentage.
    pub fn pct(&self) -> f64 {
        let mut total = 0usize;
        let mut hit = 0usize;
        for p in &self.points {
            total += p.bins.len();
            hit += p.bins_hit();
        }
        for c in &self.crosses {
            total += self.points[c.a].bins.len() * self.points[c.b].bins.len();
            hit += c.cells.len();
        }
        if total == 0 {
            100.0
        } else {
            hit as f64 / total as f64 * 100.0
        }
    }

    /// Per-bin report block for this group.
    pub fn report(&self) -> String {
        let mut s = format!("covergroup {} : {:.1}%\n", self.name, self.pct());
        for p in &self.points {
            s.push_str(&format!(
                "  point {} : {:.1}% ({} samples, {} uncovered)\n",
                p.name,
                p.pct(),
                p.samples,
                p.uncovered
            ));
            for (b, h) in p.bins.iter().zip(&p.hits) {
                s.push_str(&format!("    bin {} : {}\n", b.name, h));
            }
        }
        for c in &self.crosses {
            let total = self.points[c.a].bins.len() * self.points[c.b].bins.len();
            s.push_str(&format!(
                "  cross {} : {}/{} cells\n",
                c.name,
                c.cells.len(),
                total
            ));
        }
        s
    }
}

/// Joint report over several groups.
pub fn cov_report(groups: &[&CoverGroup]) -> String {
    let mut s = String::new();
    for g in groups {
        s.push_str(&g.report());
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gain_point() -> CoverPoint {
        CoverPoint::new(
            "gain",
            vec![
                Bin::value("zero", 0),
                Bin::range("low", 1, 0x0F),
                Bin::value("unity", 0x10),
                Bin::range("high", 0x11, 0xFF),
            ],
        )
        .unwrap()
    }

    #[test]
    fn each_sample_lands_in_exactly_its_bin() {
        let mut g = CoverGroup::new("g");
        g.add_point(gain_point()).unwrap();
        g.sample(&[("gain", 0x10)]).unwrap();
        let p = g.point("gain").unwrap();
        assert_eq!(p.hits_of("unity"), Some(1));
        assert_eq!(p.hits_of("zero"), Some(0));
        assert_eq!(p.hits_of("low"), Some(0));
        assert_eq!(p.hits_of("high"), Some(0));
    }

    #[test]
    fn out_of_bin_samples_count_as_uncovered() {
        let mut p = CoverPoint::new(
            "x",
            vec![Bin::range("a", 0, 3), Bin::range("b", 4, 7)],
        )
        .unwrap();
        p.sample(9);
        assert_eq!(p.uncovered(), 1);
        assert_eq!(p.hit_counts(), [0, 0]);
        assert_eq!(p.samples(), 1);
    }

    #[test]
    fn overlapping_bins_are_a_definition_error() {
        let err = CoverPoint::new(
            "x",
            vec![Bin::range("a", 0, 4), Bin::range("b", 4, 7)],
        )
        .unwrap_err();
        assert_eq!(
            err,
            CovError::OverlapBins {
                point: "x".to_string(),
                a: "a".to_string(),
                b: "b".to_string()
            }
        );
    }

    #[test]
    fn percentage_counts_bins_hit_at_least_once() {
        let mut p = gain_point();
        p.sample(0);
        p.sample(0);
        p.sample(5);
        p.sample(0x10);
        assert_eq!(p.bins_hit(), 3);
        assert!((p.pct() - 75.0).abs() < 1e-9);
    }

    #[test]
    fn crosses_fire_when_both_points_land() {
        let mut g = CoverGroup::new("g");
        g.add_point(CoverPoint::new("a", vec![Bin::value("x", 0), Bin::value("y", 1)]).unwrap())
            .unwrap();
        g.add_point(CoverPoint::new("b", vec![Bin::value("p", 0), Bin::value("q", 1)]).unwrap())
            .unwrap();
        g.add_cross("ab", "a", "b").unwrap();

        g.sample(&[("a", 0), ("b", 1)]).unwrap();
        g.sample(&[("a", 0)]).unwrap();
        g.sample(&[("a", 7), ("b", 0)]).unwrap();

        // One cell of four is hit: points are 3/4 bins hit.
        let cells_hit = 1;
        let bins_hit = 3;
        let expected = (bins_hit + cells_hit) as f64 / (4 + 4) as f64 * 100.0;
        assert!((g.pct() - expected).abs() < 1e-9, "{}", g.pct());
    }

    #[test]
    fn unknown_point_in_a_sample_is_an_error() {
        let mut g = CoverGroup::new("g");
        g.add_point(gain_point()).unwrap();
        assert_eq!(
            g.sample(&[("gian", 1)]).unwrap_err(),
            CovError::UnknownPoint {
                group: "g".to_string(),
                name: "gian".to_string()
            }
        );
    }

    #[test]
    fn skeleton_points_bin_the_whole_domain() {
        let specs = vec![
            CovPointSpec {
                path: "blk.CTRL.en".to_string(),
                width: 1,
            },
            CovPointSpec {
                path: "blk.GAIN.gain".to_string(),
                width: 8,
            },
        ];
        let mut g = CoverGroup::from_skeleton("blk_regs", &specs).unwrap();
        assert_eq!(g.point("blk.CTRL.en").unwrap().bins().len(), 2);
        let gain = g.point("blk.GAIN.gain").unwrap();
        assert_eq!(gain.bins().len(), 16);

        g.sample(&[("blk.GAIN.gain", 0)]).unwrap();
        g.sample(&[("blk.GAIN.gain", 255)]).unwrap();
        let gain = g.point("blk.GAIN.gain").unwrap();
        assert_eq!(gain.hits_of("r0"), Some(1));
        assert_eq!(gain.hits_of("r15"), Some(1));
        assert_eq!(gain.uncovered(), 0);
    }

    #[test]
    fn report_names_groups_points_and_bins() {
        let mut g = CoverGroup::new("gain_cov");
        g.add_point(gain_point()).unwrap();
        g.sample(&[("gain", 0x10)]).unwrap();
        let text = cov_report(&[&g]);
        assert!(text.contains("covergroup gain_cov : 25.0%"));
        assert!(text.contains("bin unity : 1"));
        assert!(text.contains("1 samples, 0 uncovered"));
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]

        /// hits + uncovered always equals samples, and counts never
        /// move backwards.
        #[test]
        fn accounting_identity_holds(values in proptest::collection::vec(0u64..0x300, 0..200)) {
            let mut p = gain_point();
            let mut prev_hits = vec![0u64; p.bins().len()];
            for v in values {
                p.sample(v);
                let hits = p.hit_counts().to_vec();
                for (h, prev) in hits.iter().zip(&prev_hits) {
                    proptest::prop_assert!(h >= prev);
                }
                prev_hits = hits;
                let total: u64 = p.hit_counts().iter().sum();
                proptest::prop_assert_eq!(total + p.uncovered(), p.samples());
            }
        }
    }
}
