use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionKind {
    Face,
    Edge,
    Vertex,
}

impl RegionKind {
    pub const ALL: [RegionKind; 3] = [RegionKind::Face, RegionKind::Edge, RegionKind::Vertex];

    pub fn name(self) -> &'static str {
        match self {
            RegionKind::Face => "face",
            RegionKind::Edge => "edge",
            RegionKind::Vertex => "vertex",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionTag {
    pub kind: RegionKind,
    /// Indices of the three largest face values, in decreasing order of value.
    pub order: Vec<usize>,
    pub r: f64,
}

/// The three largest entries of `values` with their indices; ties go to the
/// smaller index.
pub fn top_three(values: &[f64]) -> Vec<(usize, f64)> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|a, b| values[*b].total_cmp(&values[*a]).then(a.cmp(b)));
    idx.into_iter().take(3).map(|i| (i, values[i])).collect()
}

/// Face threshold: `u_(2) <= -λ^{-7/8} r^{1/8}`.
pub fn face_threshold(lambda: f64, r: f64) -> f64 {
    -lambda.powf(-0.875) * r.powf(0.125)
}

/// Vertex threshold: `u_(3) >= -λ^{-3/4} r^{1/4}`.
pub fn vertex_threshold(lambda: f64, r: f64) -> f64 {
    -lambda.powf(-0.75) * r.powf(0.25)
}

/// Stratum of a point from its sorted face values. The face condition takes
/// priority where the two conditions overlap.
pub fn classify(top: &[(usize, f64)], lambda: f64, r: f64) -> RegionTag {
    let u2 = top.get(1).map_or(f64::NEG_INFINITY, |p| p.1);
    let u3 = top.get(2).map_or(f64::NEG_INFINITY, |p| p.1);
    let kind = if u2 <= face_threshold(lambda, r) {
        RegionKind::Face
    } else if u3 >= vertex_threshold(lambda, r) {
        RegionKind::Vertex
    } else {
        RegionKind::Edge
    };
    RegionTag {
        kind,
        order: top.iter().map(|p| p.0).collect(),
        r,
    }
}

/// Radii where the tag changes: the point is a face point for
/// `r <= r_face` and a vertex point (unless face) for `r >= r_vertex`.
pub fn switch_radii(top: &[(usize, f64)], lambda: f64) -> (f64, f64) {
    let u2 = top.get(1).map_or(f64::NEG_INFINITY, |p| p.1);
    let u3 = top.get(2).map_or(f64::NEG_INFINITY, |p| p.1);
    let r_face = if u2 >= 0.0 { 0.0 } else { (-u2).powi(8) * lambda.powi(7) };
    let r_vertex = if u3 >= 0.0 { 0.0 } else { (-u3).powi(4) * lambda.powi(3) };
    (r_face, r_vertex)
}
