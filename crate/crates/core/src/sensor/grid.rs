use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plume::Point2;

/// Sensor position in the grid, 1-based: `row` counts along +y, `col` along +x.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId {
    pub row: usize,
    pub col: usize,
}

impl NodeId {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.row < 10 && self.col < 10 {
            write!(f, "N{}{}", self.row, self.col)
        } else {
            write!(f, "N{}_{}", self.row, self.col)
        }
    }
}

impl FromStr for NodeId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let body = s
            .strip_prefix('N')
            .ok_or_else(|| format!("node label `{s}` must start with `N`"))?;
        let parse = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| format!("bad node label `{s}`"))
        };
        let (row, col) = match body.split_once('_') {
            Some((r, c)) => (parse(r)?, parse(c)?),
            None if body.len() == 2 && body.is_ascii() => (parse(&body[..1])?, parse(&body[1..])?),
            None => return Err(format!("bad node label `{s}`")),
        };
        if row == 0 || col == 0 {
            return Err(format!("node indices in `{s}` are 1-based"));
        }
        Ok(NodeId::new(row, col))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorGrid {
    rows: usize,
    cols: usize,
    spacing: f64,
    origin: Point2,
    nodes: Vec<NodeId>,
}

impl SensorGrid {
    /// A `rows × cols` lattice with `spacing` metres between neighbours and
    /// node (1, 1) at `origin`; the listed cells are left empty.
    pub fn new(
        rows: usize,
        cols: usize,
        spacing: f64,
        origin: Point2,
        excluded: &[NodeId],
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::param("grid", "rows and cols must be >= 1"));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::param(
                "spacing",
                format!("must be > 0, got {spacing}"),
            ));
        }
        let nodes: Vec<NodeId> = (1..=rows)
            .flat_map(|r| (1..=cols).map(move |c| NodeId::new(r, c)))
            .filter(|n| !excluded.contains(n))
            .collect();
        Ok(Self {
            rows,
            cols,
            spacing,
            origin,
            nodes,
        })
    }

    /// 5 × 5 lattice at 0.15 m pitch with the centre cell reserved for the
    /// source, giving 24 sensors on a 0.6 m square.
    pub fn standard() -> Self {
        Self::new(5, 5, 0.15, Point2::default(), &[NodeId::new(3, 3)]).expect("valid default grid")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn origin(&self) -> Point2 {
        self.origin
    }

    /// Occupied nodes in row-major order.
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.nodes.contains(&node)
    }

    pub fn position(&self, node: NodeId) -> Point2 {
        Point2::new(
            self.origin.x + (node.col as f64 - 1.0) * self.spacing,
            self.origin.y + (node.row as f64 - 1.0) * self.spacing,
        )
    }

    /// Centre of the lattice bounding box.
    pub fn centroid(&self) -> Point2 {
        Point2::new(
            self.origin.x + (self.cols as f64 - 1.0) * self.spacing / 2.0,
            self.origin.y + (self.rows as f64 - 1.0) * self.spacing / 2.0,
        )
    }

    /// Returns a copy with every node moved by `(dx, dy)`.
    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        let mut g = self.clone();
        g.origin = Point2::new(self.origin.x + dx, self.origin.y + dy);
        g
    }
}
