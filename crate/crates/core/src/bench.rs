//! Benchmark harness comparing the CGA with the tree baselines.

use std::collections::HashSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::baseline::{KdTree, Octree};
use crate::cga::{CompressedGeometricArray, MergePolicy};
use crate::codec::{match_points_cga, match_points_octree};
use crate::error::{Error, Result};
use crate::geometry::{render_view, ViewTransform};
use crate::io::{grid_downsample, load_cloud, ReportRow};
use crate::metrics::OpMetrics;
use crate::types::{PointRecord, PointSoup, QuantizedPoint, Rgb};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Structure {
    Cga,
    Octree,
    KdTree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operation {
    Build,
    Enumerate,
    Lookup,
    Nn,
    Merge,
    Project,
    Compress,
}

impl Structure {
    pub const ALL: [Structure; 3] = [Structure::Cga, Structure::Octree, Structure::KdTree];

    pub fn name(self) -> &'static str {
        match self {
            Structure::Cga => "cga",
            Structure::Octree => "octree",
            Structure::KdTree => "kdtree",
        }
    }
}

impl Operation {
    pub const ALL: [Operation; 7] = [
        Operation::Build,
        Operation::Enumerate,
        Operation::Lookup,
        Operation::Nn,
        Operation::Merge,
        Operation::Project,
        Operation::Compress,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Operation::Build => "build",
            Operation::Enumerate => "enumerate",
            Operation::Lookup => "lookup",
            Operation::Nn => "nn",
            Operation::Merge => "merge",
            Operation::Project => "project",
            Operation::Compress => "compress",
        }
    }

    /// Whether `structure` implements this operation. The kd-tree only
    /// builds and answers nearest-neighbor queries; projection renders from
    /// a CGA only.
    pub fn supported_by(self, structure: Structure) -> bool {
        match structure {
            Structure::Cga => true,
            Structure::Octree => self != Operation::Project,
            Structure::KdTree => matches!(self, Operation::Build | Operation::Nn),
        }
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Structure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Structure::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown structure `{s}`")))
    }
}

impl FromStr for Operation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Operation::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown operation `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchPlan {
    pub inputs: Vec<PathBuf>,
    /// Size of an extra seeded uniform cloud, if any.
    pub synthetic: Option<usize>,
    pub structures: Vec<Structure>,
    pub operations: Vec<Operation>,
    pub repetitions: usize,
    pub gridsteps: Vec<u32>,
    pub qp: u8,
    pub seed: u64,
    /// Number of nearest-neighbor queries per `nn` cell.
    pub queries: usize,
}

impl Default for BenchPlan {
    fn default() -> Self {
        BenchPlan {
            inputs: Vec::new(),
            synthetic: None,
            structures: Structure::ALL.to_vec(),
            operations: Operation::ALL.to_vec(),
            repetitions: 3,
            gridsteps: vec![1],
            qp: 10,
            seed: 0,
            queries: 1000,
        }
    }
}

impl BenchPlan {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::InvalidArgument("repetitions must be at least 1".into()));
        }
        if self.structures.is_empty() || self.operations.is_empty() {
            return Err(Error::InvalidArgument("a plan needs at least one structure and one operation".into()));
        }
        if self.inputs.is_empty() && self.synthetic.is_none() {
            return Err(Error::InvalidArgument("a plan needs an input file or a synthetic cloud".into()));
        }
        if self.gridsteps.is_empty() || self.gridsteps.contains(&0) {
            return Err(Error::InvalidArgument("gridsteps must be a non-empty list of positive integers".into()));
        }
        Ok(())
    }
}

/// One measured cell: the metrics of every repetition.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchCell {
    pub structure: Structure,
    pub operation: Operation,
    pub points: usize,
    pub repetitions: Vec<OpMetrics>,
}

impl BenchCell {
    /// Median wall time with the counters of the first repetition.
    pub fn summary(&self) -> OpMetrics {
        let mut walls: Vec<u64> = self.repetitions.iter().map(|m| m.wall_ns).collect();
        walls.sort_unstable();
        OpMetrics {
            wall_ns: walls[(walls.len() - 1) / 2],
            ..self.repetitions[0]
        }
    }

    pub fn row(&self) -> ReportRow {
        ReportRow::new(self.structure.name(), self.operation.name(), self.points as u64, self.summary())
    }
}

/// `k` distinct points drawn uniformly from `[0, 2^qp)^3` with random
/// colors.
pub fn synthetic_cloud(k: usize, qp: u8, seed: u64) -> Result<PointSoup> {
    let side = 1u64.checked_shl(qp as u32).filter(|_| (1..=crate::types::MAX_QP).contains(&qp));
    let side = side.ok_or(Error::QpOutOfRange(qp as u32))?;
    if k as u128 > (side as u128).pow(3) {
        return Err(Error::InvalidArgument(format!("{k} distinct points do not fit at qp {qp}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::with_capacity(k);
    let mut recs = Vec::with_capacity(k);
    while recs.len() < k {
        let p = QuantizedPoint::new(
            rng.gen_range(0..side) as u32,
            rng.gen_range(0..side) as u32,
            rng.gen_range(0..side) as u32,
        );
        let color = Rgb::new(rng.gen(), rng.gen(), rng.gen());
        if seen.insert(p) {
            recs.push(PointRecord::new(p, color));
        }
    }
    PointSoup::from_records(recs, qp, true)
}

/// Uniform integer queries inside the cloud's bounding box.
pub fn nn_queries(soup: &PointSoup, count: usize, seed: u64) -> Vec<QuantizedPoint> {
    let Some(b) = soup.bounding_box() else {
        return Vec::new();
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            QuantizedPoint::new(
                rng.gen_range(b.min.x..=b.max.x),
                rng.gen_range(b.min.y..=b.max.y),
                rng.gen_range(b.min.z..=b.max.z),
            )
        })
        .collect()
}

/// The cloud shifted one voxel along +x (clamped), standing in for the next
/// frame in the `compress` cell.
fn shifted_frame(soup: &PointSoup) -> Result<PointSoup> {
    let max = (1u32 << soup.qp()) - 1;
    let recs = soup
        .records()
        .iter()
        .map(|r| PointRecord::new(QuantizedPoint::new((r.point.x + 1).min(max), r.point.y, r.point.z), r.color))
        .collect();
    PointSoup::from_records(recs, soup.qp(), soup.has_color())
}

fn halves(soup: &PointSoup) -> (PointSoup, PointSoup) {
    let (even, odd): (Vec<_>, Vec<_>) = soup.records().iter().enumerate().partition(|(i, _)| i % 2 == 0);
    let strip = |v: Vec<(usize, &PointRecord)>| {
        PointSoup::from_records(v.into_iter().map(|(_, r)| *r).collect(), soup.qp(), soup.has_color())
            .expect("subset of a valid soup")
    };
    (strip(even), strip(odd))
}

/// Everything a cell needs, prepared outside the timed region.
struct Fixture<'a> {
    soup: &'a PointSoup,
    queries: Vec<QuantizedPoint>,
    cga: CompressedGeometricArray,
    octree: Octree,
    kdtree: KdTree,
    halves: (PointSoup, PointSoup),
    next_frame: PointSoup,
}

impl<'a> Fixture<'a> {
    fn new(soup: &'a PointSoup, plan: &BenchPlan) -> Result<Self> {
        Ok(Fixture {
            soup,
            queries: nn_queries(soup, plan.queries, plan.seed),
            cga: CompressedGeometricArray::from_soup(soup),
            octree: Octree::build(soup)?.0,
            kdtree: KdTree::build(soup)?.0,
            halves: halves(soup),
            next_frame: shifted_frame(soup)?,
        })
    }

    fn run(&self, structure: Structure, op: Operation) -> Result<OpMetrics> {
        let sum = |ms: Vec<OpMetrics>| ms.into_iter().fold(OpMetrics::default(), |a, b| a + b);
        Ok(match (structure, op) {
            (Structure::Cga, Operation::Build) => CompressedGeometricArray::build(self.soup).1,
            (Structure::Octree, Operation::Build) => Octree::build(self.soup)?.1,
            (Structure::KdTree, Operation::Build) => KdTree::build(self.soup)?.1,
            (Structure::Cga, Operation::Enumerate) => self.cga.enumerate().1,
            (Structure::Octree, Operation::Enumerate) => self.octree.enumerate().1,
            (Structure::Cga, Operation::Lookup) => sum(self.soup.points().map(|p| self.cga.lookup(p).1).collect()),
            (Structure::Octree, Operation::Lookup) => sum(self.soup.points().map(|p| self.octree.lookup(p).1).collect()),
            (Structure::Cga, Operation::Nn) => sum(self.queries.iter().map(|&q| self.cga.nearest_neighbor(q).map(|r| r.1)).collect::<Result<_>>()?),
            (Structure::Octree, Operation::Nn) => sum(self.queries.iter().map(|&q| self.octree.nearest_neighbor(q).map(|r| r.1)).collect::<Result<_>>()?),
            (Structure::KdTree, Operation::Nn) => sum(self.queries.iter().map(|&q| self.kdtree.nearest_neighbor(q).map(|r| r.1)).collect::<Result<_>>()?),
            (Structure::Cga, Operation::Merge) => {
                let a = CompressedGeometricArray::from_soup(&self.halves.0);
                let b = CompressedGeometricArray::from_soup(&self.halves.1);
                a.merge(&b, MergePolicy::BaseWins)?.1
            }
            (Structure::Octree, Operation::Merge) => {
                let a = Octree::build(&self.halves.0)?.0;
                let b = Octree::build(&self.halves.1)?.0;
                a.merge(&b, MergePolicy::BaseWins)?.1
            }
            (Structure::Cga, Operation::Project) => render_view(&self.cga, ViewTransform::orthogonal(1.0, 1.0), 256, 256)?.1,
            (Structure::Cga, Operation::Compress) => match_points_cga(&self.cga, &self.next_frame)?.1,
            (Structure::Octree, Operation::Compress) => match_points_octree(&self.octree, &self.next_frame)?.1,
            (s, o) => return Err(Error::InvalidArgument(format!("{s} does not support {o}"))),
        })
    }
}

/// Runs every supported (cloud, gridstep, structure, operation) cell in
/// that nesting order. Unsupported pairs are skipped.
pub fn run_plan(plan: &BenchPlan) -> Result<Vec<BenchCell>> {
    plan.validate()?;
    let mut sources = Vec::new();
    for path in &plan.inputs {
        sources.push(load_cloud(path, plan.qp)?);
    }
    if let Some(k) = plan.synthetic {
        sources.push(synthetic_cloud(k, plan.qp, plan.seed)?);
    }
    let mut cells = Vec::new();
    for source in &sources {
        for &g in &plan.gridsteps {
            let cloud = if g == 1 { source.clone() } else { grid_downsample(source, g)? };
            if cloud.is_empty() {
                return Err(Error::EmptyInput);
            }
            let fixture = Fixture::new(&cloud, plan)?;
            for &s in &plan.structures {
                for &op in plan.operations.iter().filter(|op| op.supported_by(s)) {
                    let repetitions = (0..plan.repetitions).map(|_| fixture.run(s, op)).collect::<Result<_>>()?;
                    cells.push(BenchCell {
                        structure: s,
                        operation: op,
                        points: cloud.len(),
                        repetitions,
                    });
                }
            }
        }
    }
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(k: usize, qp: u8) -> BenchPlan {
        BenchPlan {
            synthetic: Some(k),
            qp,
            queries: 100,
            ..BenchPlan::default()
        }
    }

    #[test]
    fn counters_repeat_exactly() {
        let cells = run_plan(&plan(1000, 10)).unwrap();
        let supported: usize = Structure::ALL
            .iter()
            .map(|&s| Operation::ALL.iter().filter(|o| o.supported_by(s)).count())
            .sum();
        assert_eq!(cells.len(), supported);
        for c in &cells {
            assert_eq!(c.repetitions.len(), 3);
            assert!(c.repetitions.iter().all(|m| m.counters() == c.repetitions[0].counters()), "{:?}", c);
        }
        let again = run_plan(&plan(1000, 10)).unwrap();
        for (a, b) in cells.iter().zip(&again) {
            assert_eq!(a.summary().counters(), b.summary().counters());
        }
    }

    #[test]
    fn build_writes_within_octree_allocations() {
        let only = |s: Structure| BenchPlan {
            structures: vec![s],
            operations: vec![Operation::Build],
            repetitions: 1,
            ..plan(3000, 10)
        };
        let cga = run_plan(&only(Structure::Cga)).unwrap()[0].summary();
        let oct = run_plan(&only(Structure::Octree)).unwrap()[0].summary();
        // octree build reads are nodes * 9 + leaves
        assert!(cga.element_reads <= oct.element_reads);
    }

    #[test]
    fn enumerate_scales_linearly() {
        let cell = |k, s| {
            let p = BenchPlan {
                structures: vec![s],
                operations: vec![Operation::Enumerate],
                repetitions: 1,
                ..plan(k, 16)
            };
            run_plan(&p).unwrap()[0].summary()
        };
        let ratio = cell(10_000, Structure::Cga).element_reads as f64 / cell(1000, Structure::Cga).element_reads as f64;
        assert!((ratio - 10.0).abs() <= 0.5, "ratio {ratio}");
        let hops = cell(10_000, Structure::Octree).node_hops as f64 / cell(1000, Structure::Octree).node_hops as f64;
        assert!(hops > 5.0 && hops < 10.0, "hops ratio {hops}");
    }

    #[test]
    fn plan_validation() {
        let bad = [
            BenchPlan { repetitions: 0, ..plan(10, 8) },
            BenchPlan { structures: vec![], ..plan(10, 8) },
            BenchPlan { operations: vec![], ..plan(10, 8) },
            BenchPlan { gridsteps: vec![0], ..plan(10, 8) },
            BenchPlan::default(),
        ];
        for p in bad {
            assert!(run_plan(&p).is_err());
        }
        assert_eq!("kdtree".parse::<Structure>().unwrap(), Structure::KdTree);
        assert!("btree".parse::<Structure>().is_err());
        assert_eq!("nn".parse::<Operation>().unwrap(), Operation::Nn);
    }

    #[test]
    fn synthetic_is_seeded() {
        let a = synthetic_cloud(500, 8, 1).unwrap();
        assert_eq!(a.len(), 500);
        assert_eq!(a, synthetic_cloud(500, 8, 1).unwrap());
        assert_ne!(a, synthetic_cloud(500, 8, 2).unwrap());
        assert!(synthetic_cloud(9, 1, 0).is_err());
    }
}
