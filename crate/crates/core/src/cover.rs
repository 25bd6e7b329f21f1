//! Layered Delone sets of Macbeath ellipsoids over the lifted body, the DAG
//! linking consecutive levels, vertical ray-shooting descent, and the
//! patches (projected top ellipsoids with representative facets) used for
//! blending.

use nalgebra::{DMatrix, DVector};

use crate::blend::Patch;
use crate::config::BuildConfig;
use crate::error::{Error, Result};
use crate::lifted::LiftedBody;
use crate::macbeath::{macbeath_ellipsoid, Ellipsoid, EllipsoidPack};
use crate::polytope::{NormalizationTransform, Polytope};
use crate::sampling::{sample_lifted, sample_top_surface};
use crate::spatial::BoxGrid;

/// A Delone center with its covering, packing and half-covering ellipsoids
/// (all concentric scalings of one Macbeath ellipsoid of the expanded body).
#[derive(Clone, Debug, PartialEq)]
pub struct DelonePoint {
    pub x: DVector<f64>,
    pub covering: Ellipsoid,
    pub packing: Ellipsoid,
    pub half_covering: Ellipsoid,
}

impl DelonePoint {
    /// Derives the smaller ellipsoids from the covering one.
    pub fn from_covering(covering: Ellipsoid, lambda_c: f64, lambda_p: f64) -> Self {
        let packing = covering.scaled(lambda_p / lambda_c).expect("positive scale");
        let half_covering = covering.scaled(0.5).expect("positive scale");
        Self { x: covering.center().clone(), covering, packing, half_covering }
    }
}

fn bbox(e: &Ellipsoid) -> (Vec<f64>, Vec<f64>) {
    let w = e.half_widths();
    let c = e.center();
    (
        (0..c.len()).map(|i| c[i] - w[i]).collect(),
        (0..c.len()).map(|i| c[i] + w[i]).collect(),
    )
}

/// Parameters of one Delone-set construction.
#[derive(Clone, Debug, PartialEq)]
pub struct DeloneParams {
    pub lambda_c: f64,
    pub lambda_p: f64,
    /// Candidate sample size.
    pub samples: usize,
    pub verify_rounds: usize,
    pub seed: u64,
    /// Distinguishes the sample streams of different levels.
    pub stream: u64,
    pub volume_tol: f64,
    pub intersection_tol: f64,
}

struct Greedy<'a> {
    expanded: &'a LiftedBody,
    params: &'a DeloneParams,
    points: Vec<DelonePoint>,
    packings: EllipsoidPack,
    half_grid: BoxGrid,
    pack_grid: BoxGrid,
}

enum Outcome {
    Accepted,
    Packed,
}

impl<'a> Greedy<'a> {
    fn new(expanded: &'a LiftedBody, params: &'a DeloneParams) -> Self {
        let dim = expanded.ambient_dim();
        Self {
            expanded,
            params,
            points: Vec::new(),
            packings: EllipsoidPack::new(dim),
            half_grid: BoxGrid::with_subdivision(dim, 2),
            pack_grid: BoxGrid::new(dim),
        }
    }

    fn covered(&self, q: &DVector<f64>) -> bool {
        let x = q.as_slice();
        self.half_grid.any_containing(x, |i| self.points[i].half_covering.value_at(x) <= 1.0)
    }

    fn offer(&mut self, q: &DVector<f64>) -> Result<Outcome> {
        let p = self.params;
        let covering = macbeath_ellipsoid(self.expanded.upper(), q, p.lambda_c, p.volume_tol)?;
        let point = DelonePoint::from_covering(covering, p.lambda_c, p.lambda_p);
        let mut single = EllipsoidPack::new(point.x.len());
        single.push(&point.packing);
        let (lo, hi) = bbox(&point.packing);
        for i in self.pack_grid.query(&lo, &hi) {
            if single.intersects_with(0, &self.packings, i, p.intersection_tol) {
                return Ok(Outcome::Packed);
            }
        }
        self.pack_grid.insert(&lo, &hi);
        self.packings.push(&point.packing);
        let (lo, hi) = bbox(&point.half_covering);
        self.half_grid.insert(&lo, &hi);
        self.points.push(point);
        Ok(Outcome::Accepted)
    }
}

/// Greedy maximal packing over a seeded sample of `body`, followed by rounds of
/// coverage verification on fresh samples. On return the half-scaled covering
/// ellipsoids cover every candidate and verification sample.
pub fn build_delone_set(body: &LiftedBody, expanded: &LiftedBody, params: &DeloneParams) -> Result<Vec<DelonePoint>> {
    if !(expanded.expansion() > 0.0) {
        return Err(Error::InvalidArgument("the expanded body needs a positive expansion".into()));
    }
    if !(params.lambda_p > 0.0 && params.lambda_p < params.lambda_c && params.lambda_c < 1.0) {
        return Err(Error::InvalidArgument("need 0 < lambda_p < lambda_c < 1".into()));
    }
    let base = body.base();
    let d = base.dim();
    let level = params.stream;
    let mut greedy = Greedy::new(expanded, params);

    // a central point first, so coarse levels start from a symmetric seed
    let (center, radius) = base.chebyshev_center();
    let mut seed_point = DVector::zeros(d + 1);
    seed_point.rows_mut(0, d).copy_from(&center);
    seed_point[d] = 0.5 * radius;
    let mut work = vec![seed_point];
    work.extend(sample_lifted(base, params.samples, params.seed, params.stream * 64));
    for q in &work {
        if !greedy.covered(q) {
            greedy.offer(q)?;
        }
    }

    // fresh samples; uncovered witnesses are inserted directly
    for round in 0..params.verify_rounds {
        let n = params.samples.max(16 * greedy.points.len());
        let stream = params.stream * 64 + 1 + 2 * round as u64;
        let mut fresh = sample_lifted(base, n, params.seed, stream);
        fresh.extend(sample_top_surface(base, n, params.seed, stream + 1));
        let mut blocked = 0usize;
        for q in &fresh {
            if !greedy.covered(q) {
                if let Outcome::Packed = greedy.offer(q)? {
                    blocked += 1;
                }
            }
        }
        if blocked > 0 {
            return Err(Error::CoverageFailure {
                level: level as usize,
                detail: format!("{blocked} uncovered verification samples are blocked by the packing"),
            });
        }
    }
    Ok(greedy.points)
}

/// One node of the layered DAG.
#[derive(Clone, Debug, PartialEq)]
pub struct DagNode {
    pub point: DelonePoint,
    pub level: usize,
    /// Indices into the level below.
    pub children: Vec<usize>,
    /// Level-0 nodes whose covering ellipsoid reaches the top surface.
    pub is_top: bool,
    pub rep_index: Option<usize>,
}

/// Layered cover plus the patches derived from its top level-0 nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct DagStructure {
    pub config: BuildConfig,
    pub transform: NormalizationTransform,
    /// Normalized base polytope.
    pub polytope: Polytope,
    pub levels: Vec<Vec<DagNode>>,
    pub patches: Vec<Patch>,
    /// Per patch, the other patches whose projections intersect it (ascending).
    pub adjacency: Vec<Vec<usize>>,
    /// Per level-0 node, its patch index.
    pub patch_of_node: Vec<Option<usize>>,
}

/// Result of a vertical ray-shooting descent.
#[derive(Clone, Debug, PartialEq)]
pub struct Descent {
    /// Level-0 node index.
    pub leaf: usize,
    /// Node index per level, root first.
    pub path: Vec<usize>,
}

/// True iff the covering ellipsoid meets the top surface `z = min_j (b_j - a_j . x)`.
pub fn reaches_top_surface(p: &Polytope, covering: &Ellipsoid) -> bool {
    top_surface_reach(p, covering) >= 0.0
}

/// `max_{y in E} max_j (y_z + a_j . y_x - b_j)`; nonnegative iff `E` meets the top surface.
pub fn top_surface_reach(p: &Polytope, covering: &Ellipsoid) -> f64 {
    let d = p.dim();
    let c = covering.center();
    let pinv = covering.inverse_shape();
    p.halfspaces()
        .iter()
        .map(|h| {
            let mut w = DVector::zeros(d + 1);
            w.rows_mut(0, d).copy_from(&h.a);
            w[d] = 1.0;
            w.dot(c) - h.b + w.dot(&(&pinv * &w)).sqrt()
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Facet of least slack at the projected center; ties go to the lowest index.
pub fn assign_representative(p: &Polytope, covering: &Ellipsoid) -> usize {
    let d = p.dim();
    let cbar = covering.center().rows(0, d).into_owned();
    p.min_slack(&cbar).0
}

/// `max_{x in shadow} (v_rep(x) - min_j v_j(x))`, the worst overestimate of the
/// representative over the projected ellipsoid.
pub fn representative_excess(p: &Polytope, rep: usize, shadow: &Ellipsoid) -> f64 {
    let pinv = shadow.inverse_shape();
    let c = shadow.center();
    let hr = &p.halfspaces()[rep];
    p.halfspaces()
        .iter()
        .map(|h| {
            let diff = &h.a - &hr.a;
            hr.b - h.b + diff.dot(c) + diff.dot(&(&pinv * &diff)).max(0.0).sqrt()
        })
        .fold(0.0, f64::max)
}

/// Builds from an arbitrary polytope, normalizing it first.
pub fn build(p: &Polytope, config: &BuildConfig) -> Result<DagStructure> {
    let (normalized, transform) = p.normalize();
    build_dag(&normalized, transform, config)
}

/// Builds the structure for an already normalized polytope.
pub fn build_dag(p: &Polytope, transform: NormalizationTransform, config: &BuildConfig) -> Result<DagStructure> {
    let eps = config.epsilon;
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 1/2), got {eps}")));
    }
    let d = p.dim();
    let lambda_c = config.lambda_c(d);
    let lambda_p = config.lambda_p(d);
    let tol = config.tolerances;
    let body = LiftedBody::lift(p);

    let mut raw_levels: Vec<Vec<DelonePoint>> = Vec::new();
    let mut delta = eps;
    for level in 0..config.max_levels {
        let expanded = body.expand(delta)?;
        let params = DeloneParams {
            lambda_c,
            lambda_p,
            samples: config.samples_for(d, delta),
            verify_rounds: config.verify_rounds,
            seed: config.seed,
            stream: level as u64,
            volume_tol: tol.ellipsoid_volume,
            intersection_tol: tol.intersection,
        };
        let pts = build_delone_set(&body, &expanded, &params)?;
        let single = pts.len() == 1;
        raw_levels.push(pts);
        if single {
            break;
        }
        delta *= 2.0;
    }
    if raw_levels.last().map(|l| l.len()) != Some(1) {
        return Err(Error::CoverageFailure {
            level: raw_levels.len(),
            detail: "level cap reached before a single root".into(),
        });
    }

    let mut levels: Vec<Vec<DagNode>> = Vec::with_capacity(raw_levels.len());
    for (level, pts) in raw_levels.into_iter().enumerate() {
        let children = if level == 0 {
            vec![Vec::new(); pts.len()]
        } else {
            link_children(&pts, &levels[level - 1], tol.intersection)
        };
        levels.push(
            pts.into_iter()
                .zip(children)
                .map(|(point, children)| DagNode { point, level, children, is_top: false, rep_index: None })
                .collect(),
        );
    }

    let mut patches = Vec::new();
    let mut patch_of_node = vec![None; levels[0].len()];
    for (i, node) in levels[0].iter_mut().enumerate() {
        if !reaches_top_surface(p, &node.point.covering) {
            continue;
        }
        let rep = assign_representative(p, &node.point.covering);
        let shadow = node.point.covering.project();
        let excess = representative_excess(p, rep, &shadow);
        if excess > eps + tol.geometric {
            return Err(Error::RepresentativeInvalid { node: i, excess, epsilon: eps });
        }
        node.is_top = true;
        node.rep_index = Some(rep);
        patch_of_node[i] = Some(patches.len());
        let h = &p.halfspaces()[rep];
        patches.push(Patch {
            node: i,
            center: shadow.center().clone(),
            shape: shadow.shape().clone(),
            rep,
            a: h.a.clone(),
            b: h.b,
        });
    }
    let adjacency = patch_adjacency(&patches, tol.intersection);
    Ok(DagStructure { config: config.clone(), transform, polytope: p.clone(), levels, patches, adjacency, patch_of_node })
}

/// Children of each upper node: lower nodes whose covering ellipsoids meet its
/// own. Lists come out ascending.
fn link_children(upper: &[DelonePoint], lower: &[DagNode], tol: f64) -> Vec<Vec<usize>> {
    let dim = upper[0].x.len();
    let mut up = EllipsoidPack::new(dim);
    let mut grid = BoxGrid::new(dim);
    for u in upper {
        up.push(&u.covering);
        let (lo, hi) = bbox(&u.covering);
        grid.insert(&lo, &hi);
    }
    let mut low = EllipsoidPack::new(dim);
    let mut children = vec![Vec::new(); upper.len()];
    for (j, node) in lower.iter().enumerate() {
        low.push(&node.point.covering);
        let (lo, hi) = bbox(&node.point.covering);
        for i in grid.query(&lo, &hi) {
            if low.intersects_with(j, &up, i, tol) {
                children[i].push(j);
            }
        }
    }
    children
}

fn patch_adjacency(patches: &[Patch], tol: f64) -> Vec<Vec<usize>> {
    if patches.is_empty() {
        return Vec::new();
    }
    let dim = patches[0].center.len();
    let mut pack = EllipsoidPack::new(dim);
    let mut grid = BoxGrid::new(dim);
    let mut adjacency = vec![Vec::new(); patches.len()];
    // each patch is tested against the earlier ones only, so both lists stay ascending
    for (i, p) in patches.iter().enumerate() {
        let shadow = Ellipsoid::from_parts_unchecked(p.center.clone(), p.shape.clone());
        pack.push(&shadow);
        let (lo, hi) = bbox(&shadow);
        for j in grid.query(&lo, &hi) {
            if pack.intersects(i, j, tol) {
                adjacency[i].push(j);
                adjacency[j].push(i);
            }
        }
        grid.insert(&lo, &hi);
    }
    adjacency
}

impl DagStructure {
    pub fn dim(&self) -> usize {
        self.polytope.dim()
    }

    pub fn epsilon(&self) -> f64 {
        self.config.epsilon
    }

    /// Index of the top level (`m`).
    pub fn top_level(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level_sizes(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.len()).collect()
    }

    pub fn max_out_degree(&self) -> usize {
        self.levels.iter().flatten().map(|n| n.children.len()).max().unwrap_or(0)
    }

    pub fn node_count(&self) -> usize {
        self.levels.iter().map(|l| l.len()).sum()
    }

    /// Depth-first descent along the vertical line through `q`, preferring
    /// children with the highest intersection. A leaf is accepted when it is a
    /// patch containing `q` and its ellipsoid reaches `z >= 0` over `q`.
    pub fn ray_shoot_descend(&self, q: &DVector<f64>) -> Result<Descent> {
        if q.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: q.len() });
        }
        let top = self.top_level();
        let mut failed: Vec<Vec<bool>> = self.levels.iter().map(|l| vec![false; l.len()]).collect();
        let mut path = Vec::with_capacity(top + 1);
        let roots: Vec<usize> = (0..self.levels[top].len()).collect();
        if self.descend(q, top, &roots, &mut failed, &mut path) {
            path.reverse();
            let leaf = path[top];
            return Ok(Descent { leaf, path });
        }
        Err(Error::OutsidePolytope)
    }

    fn descend(&self, q: &DVector<f64>, level: usize, candidates: &[usize], failed: &mut [Vec<bool>], path: &mut Vec<usize>) -> bool {
        let xs = q.as_slice();
        let mut hits: Vec<(f64, usize)> = candidates
            .iter()
            .filter(|&&i| !failed[level][i])
            .filter_map(|&i| self.levels[level][i].point.covering.vertical_line_hit(xs).map(|(_, hi)| (hi, i)))
            .collect();
        hits.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        for (z_high, i) in hits {
            if level == 0 {
                if z_high < -self.config.tolerances.geometric {
                    failed[0][i] = true;
                    continue;
                }
                if let Some(pi) = self.patch_of_node[i] {
                    if self.patches[pi].f(q) < 1.0 {
                        path.push(i);
                        return true;
                    }
                }
                failed[0][i] = true;
            } else {
                let children = &self.levels[level][i].children;
                if self.descend(q, level - 1, children, failed, path) {
                    path.push(i);
                    return true;
                }
                failed[level][i] = true;
            }
        }
        false
    }

    /// Patch indices whose projected ellipsoid strictly contains `q`.
    pub fn patches_at(&self, q: &DVector<f64>) -> Result<Vec<usize>> {
        let leaf = self.ray_shoot_descend(q)?.leaf;
        Ok(self.patches_near_leaf(leaf, q))
    }

    fn patches_near_leaf(&self, leaf: usize, q: &DVector<f64>) -> Vec<usize> {
        let pi = self.patch_of_node[leaf].expect("descent ends at a patch");
        let mut out: Vec<usize> = std::iter::once(pi)
            .chain(self.adjacency[pi].iter().copied())
            .filter(|&j| self.patches[j].f(q) < 1.0)
            .collect();
        out.sort_unstable();
        out
    }

    /// Descent plus the containing patches.
    pub fn locate(&self, q: &DVector<f64>) -> Result<(Descent, Vec<usize>)> {
        let descent = self.ray_shoot_descend(q)?;
        let patches = self.patches_near_leaf(descent.leaf, q);
        Ok((descent, patches))
    }

    /// Representative value of the descent leaf alone (no blending).
    pub fn witness_value(&self, q: &DVector<f64>) -> Result<(f64, usize)> {
        let leaf = self.ray_shoot_descend(q)?.leaf;
        let pi = self.patch_of_node[leaf].expect("descent ends at a patch");
        Ok((self.patches[pi].v(q), pi))
    }
}

/// On-disk node record.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NodeRecord {
    pub center: Vec<f64>,
    /// Full symmetric covering shape, row-major.
    pub shape: Vec<f64>,
    pub level: usize,
    pub children: Vec<usize>,
    #[serde(rename = "isTop")]
    pub is_top: bool,
    #[serde(rename = "repIndex")]
    pub rep_index: Option<usize>,
}

/// On-disk patch record.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PatchRecord {
    pub node: usize,
    pub center: Vec<f64>,
    pub shape: Vec<f64>,
    pub rep: usize,
    pub adjacency: Vec<usize>,
}

/// Versioned structure file.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StructureFile {
    pub version: u32,
    pub epsilon: f64,
    pub seed: u64,
    pub config: BuildConfig,
    pub transform: NormalizationTransform,
    pub polytope: crate::polytope::PolytopeFile,
    pub levels: Vec<Vec<NodeRecord>>,
    pub patches: Vec<PatchRecord>,
}

pub const STRUCTURE_VERSION: u32 = 1;

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

fn from_row_major(d: usize, v: &[f64]) -> Result<DMatrix<f64>> {
    if v.len() != d * d {
        return Err(Error::Format(format!("shape needs {} entries, found {}", d * d, v.len())));
    }
    Ok(DMatrix::from_row_slice(d, d, v))
}

impl DagStructure {
    pub fn to_file(&self) -> StructureFile {
        StructureFile {
            version: STRUCTURE_VERSION,
            epsilon: self.config.epsilon,
            seed: self.config.seed,
            config: self.config.clone(),
            transform: self.transform.clone(),
            polytope: self.polytope.to_file(),
            levels: self
                .levels
                .iter()
                .map(|l| {
                    l.iter()
                        .map(|n| NodeRecord {
                            center: n.point.x.as_slice().to_vec(),
                            shape: row_major(n.point.covering.shape()),
                            level: n.level,
                            children: n.children.clone(),
                            is_top: n.is_top,
                            rep_index: n.rep_index,
                        })
                        .collect()
                })
                .collect(),
            patches: self
                .patches
                .iter()
                .zip(&self.adjacency)
                .map(|(p, adj)| PatchRecord {
                    node: p.node,
                    center: p.center.as_slice().to_vec(),
                    shape: row_major(&p.shape),
                    rep: p.rep,
                    adjacency: adj.clone(),
                })
                .collect(),
        }
    }

    /// Reads a stored structure. Shapes are not re-validated here so that a
    /// damaged file can still be inspected by the verification suite.
    pub fn from_file(file: &StructureFile) -> Result<Self> {
        if file.version != STRUCTURE_VERSION {
            return Err(Error::Format(format!("unsupported structure version {}", file.version)));
        }
        let hs = file
            .polytope
            .halfspaces
            .iter()
            .map(|h| crate::polytope::Halfspace::new(DVector::from_vec(h.a.clone()), h.b))
            .collect::<Result<Vec<_>>>()?;
        let polytope = Polytope::new(file.polytope.dim, hs)?;
        let d = polytope.dim();
        let config = file.config.clone();
        let lambda_c = config.lambda_c(d);
        let lambda_p = config.lambda_p(d);
        let mut levels = Vec::with_capacity(file.levels.len());
        for (li, l) in file.levels.iter().enumerate() {
            let mut nodes = Vec::with_capacity(l.len());
            for n in l {
                if n.center.len() != d + 1 {
                    return Err(Error::Format("node center has the wrong dimension".into()));
                }
                if n.level != li {
                    return Err(Error::Format("node level does not match its position".into()));
                }
                let below = if li == 0 { 0 } else { file.levels[li - 1].len() };
                if n.children.iter().any(|&c| c >= below) {
                    return Err(Error::Format("child index out of range".into()));
                }
                let covering = Ellipsoid::from_parts_unchecked(DVector::from_vec(n.center.clone()), from_row_major(d + 1, &n.shape)?);
                let point = if covering.is_positive_definite() {
                    DelonePoint::from_covering(covering, lambda_c, lambda_p)
                } else {
                    DelonePoint { x: covering.center().clone(), packing: covering.clone(), half_covering: covering.clone(), covering }
                };
                nodes.push(DagNode { point, level: li, children: n.children.clone(), is_top: n.is_top, rep_index: n.rep_index });
            }
            levels.push(nodes);
        }
        if levels.is_empty() || levels[0].is_empty() {
            return Err(Error::Format("structure has no nodes".into()));
        }
        let mut patch_of_node = vec![None; levels[0].len()];
        let mut patches = Vec::with_capacity(file.patches.len());
        let mut adjacency = Vec::with_capacity(file.patches.len());
        for (i, r) in file.patches.iter().enumerate() {
            if r.node >= levels[0].len() || r.rep >= polytope.len() || r.center.len() != d {
                return Err(Error::Format(format!("patch {i} has an out-of-range field")));
            }
            if r.adjacency.iter().any(|&j| j >= file.patches.len()) {
                return Err(Error::Format(format!("patch {i} lists an unknown neighbour")));
            }
            patch_of_node[r.node] = Some(i);
            let h = &polytope.halfspaces()[r.rep];
            patches.push(Patch {
                node: r.node,
                center: DVector::from_vec(r.center.clone()),
                shape: from_row_major(d, &r.shape)?,
                rep: r.rep,
                a: h.a.clone(),
                b: h.b,
            });
            adjacency.push(r.adjacency.clone());
        }
        Ok(Self { config, transform: file.transform.clone(), polytope, levels, patches, adjacency, patch_of_node })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_file())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: StructureFile = serde_json::from_str(s)?;
        Self::from_file(&file)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    fn square_structure(eps: f64) -> DagStructure {
        build(&shapes::unit_square(), &BuildConfig::new(eps, 1)).unwrap()
    }

    #[test]
    fn representative_picks_nearest_facet_and_lowest_on_ties() {
        let (p, _) = shapes::unit_square().normalize();
        let near_left = Ellipsoid::ball(DVector::from_vec(vec![-0.3, 0.0, 0.1]), 0.01);
        assert_eq!(assign_representative(&p, &near_left), 0);
        let center = Ellipsoid::ball(DVector::from_vec(vec![0.0, 0.0, 0.1]), 0.01);
        assert_eq!(assign_representative(&p, &center), 0);
        let near_top = Ellipsoid::ball(DVector::from_vec(vec![0.0, 0.3, 0.1]), 0.01);
        assert_eq!(assign_representative(&p, &near_top), 3);
    }

    #[test]
    fn reach_test_matches_sampling() {
        let (p, _) = shapes::unit_square().normalize();
        // just under the apex of the envelope over the origin
        let r = p.min_slack(&DVector::zeros(2)).1;
        let below = Ellipsoid::ball(DVector::from_vec(vec![0.0, 0.0, r - 0.02]), 0.01);
        let touching = Ellipsoid::ball(DVector::from_vec(vec![0.0, 0.0, r - 0.02]), 0.03);
        assert!(!reaches_top_surface(&p, &below));
        assert!(reaches_top_surface(&p, &touching));
    }

    #[test]
    fn excess_of_exact_representative_is_zero_inside_region() {
        let (p, _) = shapes::unit_square().normalize();
        let shadow = Ellipsoid::ball(DVector::from_vec(vec![-0.3, 0.0]), 0.02);
        assert_eq!(representative_excess(&p, 0, &shadow), 0.0);
        assert!(representative_excess(&p, 2, &shadow) > 0.25);
    }

    #[test]
    fn square_build_has_single_root_and_valid_links() {
        let s = square_structure(0.1);
        assert_eq!(s.levels.last().unwrap().len(), 1);
        for l in 1..s.levels.len() {
            for n in &s.levels[l] {
                assert!(!n.children.is_empty());
            }
        }
        assert!(!s.patches.is_empty());
        let q = DVector::zeros(2);
        let d = s.ray_shoot_descend(&q).unwrap();
        assert_eq!(d.path.len(), s.levels.len());
        let leaf = &s.levels[0][d.leaf];
        assert!(leaf.is_top);
    }

    #[test]
    fn outside_points_reported() {
        let s = square_structure(0.1);
        // normalized square has half-width 1/(2 sqrt 2); go 2 eps beyond the right facet
        let x = 0.5 / 2f64.sqrt() + 0.2;
        assert!(matches!(s.ray_shoot_descend(&DVector::from_vec(vec![x, 0.0])), Err(Error::OutsidePolytope)));
        assert!(matches!(s.patches_at(&DVector::from_vec(vec![5.0, 5.0])), Err(Error::OutsidePolytope)));
    }

    #[test]
    fn file_round_trip_is_exact() {
        let s = square_structure(0.2);
        let json = s.to_json().unwrap();
        let back = DagStructure::from_json(&json).unwrap();
        assert_eq!(back.to_json().unwrap(), json);
        assert_eq!(back.patches, s.patches);
        assert_eq!(back.levels.len(), s.levels.len());
    }

    #[test]
    fn epsilon_range_enforced() {
        let (p, t) = shapes::unit_square().normalize();
        for eps in [0.0, -0.1, 0.5, 0.7] {
            assert!(matches!(build_dag(&p, t.clone(), &BuildConfig::new(eps, 1)), Err(Error::InvalidArgument(_))));
        }
    }
}
