//! Star neighborhood around a station: center, two upwind, two downwind and
//! four diagonal nodes placed in plate-carree lat/lon degree space.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data_io::{FoehnType, StationMeta};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[allow(clippy::upper_case_acronyms)]
pub enum NodeId {
    C,
    U,
    UU,
    D,
    DD,
    UR,
    UL,
    DR,
    DL,
}

impl NodeId {
    pub const ALL: [NodeId; 9] = [
        NodeId::C,
        NodeId::U,
        NodeId::UU,
        NodeId::D,
        NodeId::DD,
        NodeId::UR,
        NodeId::UL,
        NodeId::DR,
        NodeId::DL,
    ];

    pub const UPWIND: [NodeId; 4] = [NodeId::U, NodeId::UU, NodeId::UR, NodeId::UL];
    pub const DOWNWIND: [NodeId; 4] = [NodeId::D, NodeId::DD, NodeId::DR, NodeId::DL];
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Node positions (lat, lon) plus the upwind axis bearing in degrees
/// clockwise from north.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeStar {
    pub nodes: BTreeMap<NodeId, (f64, f64)>,
    pub upwind_axis: f64,
}

impl NodeStar {
    pub fn node(&self, id: NodeId) -> (f64, f64) {
        self.nodes[&id]
    }
}

fn normalize_deg(b: f64) -> f64 {
    b.rem_euclid(360.0)
}

/// Offset from (lat, lon) by radius degrees along a compass bearing, in
/// plate-carree degree space.
fn offset(lat: f64, lon: f64, bearing_deg: f64, radius: f64) -> (f64, f64) {
    let b = bearing_deg.to_radians();
    (lat + radius * b.cos(), lon + radius * b.sin())
}

/// Closest point on segment a-b to p, in degree space.
fn nearest_on_segment(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let (px, py) = (p.1, p.0);
    let (ax, ay) = (a.1, a.0);
    let (bx, by) = (b.1, b.0);
    let (dx, dy) = (bx - ax, by - ay);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return a;
    }
    let t = (((px - ax) * dx + (py - ay) * dy) / len2).clamp(0.0, 1.0);
    (ay + t * dy, ax + t * dx)
}

fn dist2(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)
}

/// Builds the star for a station: the upwind axis is the bearing from the
/// station toward its nearest point on the ridge polyline; ties between
/// equidistant segments are broken by polyline order.
pub fn build_star(
    station: &StationMeta,
    ridge: &[(f64, f64)],
    foehn_type: FoehnType,
) -> Result<NodeStar> {
    if ridge.len() < 2 {
        return Err(Error::Value("ridge polyline needs at least 2 vertices".into()));
    }
    let c = (station.lat, station.lon);
    let mut best: Option<((f64, f64), f64)> = None;
    for seg in ridge.windows(2) {
        let q = nearest_on_segment(c, seg[0], seg[1]);
        let d2 = dist2(c, q);
        if best.map_or(true, |(_, bd)| d2 < bd) {
            best = Some((q, d2));
        }
    }
    let (q, d2) = best.unwrap();
    if d2 == 0.0 {
        return Err(Error::Value(format!(
            "station {} lies on the ridge; upwind axis undefined",
            station.id
        )));
    }
    let upwind = normalize_deg((q.1 - c.1).atan2(q.0 - c.0).to_degrees());
    let downwind = normalize_deg(upwind + 180.0);

    // downwind must point north for south-foehn stations, south for north-foehn
    let northward = downwind.to_radians().cos();
    let consistent = match foehn_type {
        FoehnType::South => northward > 0.0,
        FoehnType::North => northward < 0.0,
    };
    if !consistent {
        return Err(Error::Value(format!(
            "station {}: ridge lies on the wrong side for {:?} foehn",
            station.id, foehn_type
        )));
    }

    let mut nodes = BTreeMap::new();
    nodes.insert(NodeId::C, c);
    nodes.insert(NodeId::U, offset(c.0, c.1, upwind, 1.0));
    nodes.insert(NodeId::UU, offset(c.0, c.1, upwind, 2.0));
    nodes.insert(NodeId::D, offset(c.0, c.1, downwind, 1.0));
    nodes.insert(NodeId::DD, offset(c.0, c.1, downwind, 2.0));
    nodes.insert(NodeId::UR, offset(c.0, c.1, normalize_deg(upwind - 45.0), 2.0));
    nodes.insert(NodeId::UL, offset(c.0, c.1, normalize_deg(upwind + 45.0), 2.0));
    nodes.insert(NodeId::DR, offset(c.0, c.1, normalize_deg(downwind + 45.0), 2.0));
    nodes.insert(NodeId::DL, offset(c.0, c.1, normalize_deg(downwind - 45.0), 2.0));

    Ok(NodeStar {
        nodes,
        upwind_axis: upwind,
    })
}
