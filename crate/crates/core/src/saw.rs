//! Self-avoiding walks with endpoint roles.

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::lattice::{Edge, LatticeDomain, Site};

/// What the two ends of a walk mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Roles {
    /// No roles attached (output of loop erasure).
    Free,
    /// Starts across boundary edge `start` (first vertex outside), ends at the origin.
    Radial { start: Edge },
    /// Starts across `start` and leaves through `end` (last vertex outside).
    Chordal { start: Edge, end: Edge },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Saw {
    vertices: Vec<Site>,
    roles: Roles,
}

fn check_path(vertices: &[Site]) -> Result<()> {
    if vertices.is_empty() {
        return Err(Error::InvalidPath("empty walk".into()));
    }
    for (i, w) in vertices.windows(2).enumerate() {
        if !w[0].is_adjacent(w[1]) {
            return Err(Error::NonAdjacentStep { index: i + 1 });
        }
    }
    let mut seen = HashSet::with_capacity(vertices.len());
    for v in vertices {
        if !seen.insert(*v) {
            return Err(Error::InvalidPath(format!("vertex {v:?} repeats")));
        }
    }
    Ok(())
}

impl Saw {
    pub fn new(vertices: Vec<Site>) -> Result<Self> {
        check_path(&vertices)?;
        Ok(Saw { vertices, roles: Roles::Free })
    }

    pub(crate) fn from_parts_unchecked(vertices: Vec<Site>, roles: Roles) -> Self {
        Saw { vertices, roles }
    }

    /// Radial walk `[a.outer, a.inner, ..., 0]` with interior vertices in `domain`.
    pub fn radial(domain: &LatticeDomain, start: Edge, vertices: Vec<Site>) -> Result<Self> {
        check_path(&vertices)?;
        if !domain.is_boundary_edge(&start) {
            return Err(Error::InvalidPath(format!("{start:?} is not a boundary edge")));
        }
        if vertices.len() < 2 || vertices[0] != start.outer || vertices[1] != start.inner {
            return Err(Error::InvalidPath("walk does not start across the start edge".into()));
        }
        if *vertices.last().unwrap() != Site::ORIGIN {
            return Err(Error::InvalidPath("radial walk must end at the origin".into()));
        }
        for v in &vertices[1..] {
            if !domain.contains(*v) {
                return Err(Error::PathLeavesDomain(*v));
            }
        }
        Ok(Saw { vertices, roles: Roles::Radial { start } })
    }

    /// Chordal walk `[a.outer, a.inner, ..., b.inner, b.outer]`.
    pub fn chordal(domain: &LatticeDomain, start: Edge, end: Edge, vertices: Vec<Site>) -> Result<Self> {
        check_path(&vertices)?;
        for e in [start, end] {
            if !domain.is_boundary_edge(&e) {
                return Err(Error::InvalidPath(format!("{e:?} is not a boundary edge")));
            }
        }
        let n = vertices.len();
        if n < 3 || vertices[0] != start.outer || vertices[1] != start.inner {
            return Err(Error::InvalidPath("walk does not start across the start edge".into()));
        }
        if vertices[n - 1] != end.outer || vertices[n - 2] != end.inner {
            return Err(Error::InvalidPath("walk does not leave through the end edge".into()));
        }
        for v in &vertices[1..n - 1] {
            if !domain.contains(*v) {
                return Err(Error::PathLeavesDomain(*v));
            }
        }
        Ok(Saw { vertices, roles: Roles::Chordal { start, end } })
    }

    pub fn vertices(&self) -> &[Site] {
        &self.vertices
    }

    pub fn roles(&self) -> Roles {
        self.roles
    }

    /// Number of steps `k`.
    pub fn steps(&self) -> usize {
        self.vertices.len() - 1
    }

    /// Lattice vertices strictly inside the domain: everything except the
    /// outer endpoints of the start and end edges.
    pub fn interior_sites(&self) -> &[Site] {
        match self.roles {
            Roles::Free => &self.vertices,
            Roles::Radial { .. } => &self.vertices[1..],
            Roles::Chordal { .. } => &self.vertices[1..self.vertices.len() - 1],
        }
    }

    /// The same vertex sequence traversed backwards, without roles.
    pub fn reversed(&self) -> Saw {
        let mut v = self.vertices.clone();
        v.reverse();
        Saw { vertices: v, roles: Roles::Free }
    }

    /// `x,y` pairs separated by spaces.
    pub fn to_line(&self) -> String {
        let mut s = String::with_capacity(self.vertices.len() * 8);
        for (i, v) in self.vertices.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{},{}", v.x, v.y);
        }
        s
    }

    pub fn parse_line(line: &str) -> Result<Saw> {
        let mut vertices = Vec::new();
        for tok in line.split_whitespace() {
            let (x, y) = tok
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("bad vertex {tok}")))?;
            let x = x.parse().map_err(|_| Error::Parse(format!("bad vertex {tok}")))?;
            let y = y.parse().map_err(|_| Error::Parse(format!("bad vertex {tok}")))?;
            vertices.push(Site::new(x, y));
        }
        Saw::new(vertices)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roles_are_checked() {
        let a = LatticeDomain::rectangle(0, 1, 0, 0).unwrap();
        let left = Edge::new(Site::new(0, 0), Site::new(-1, 0));
        let right = Edge::new(Site::new(1, 0), Site::new(2, 0));
        let r = Saw::radial(&a, left, vec![Site::new(-1, 0), Site::new(0, 0)]).unwrap();
        assert_eq!(r.steps(), 1);
        assert_eq!(r.interior_sites(), &[Site::ORIGIN]);
        let c = Saw::chordal(
            &a,
            left,
            right,
            vec![Site::new(-1, 0), Site::new(0, 0), Site::new(1, 0), Site::new(2, 0)],
        )
        .unwrap();
        assert_eq!(c.interior_sites().len(), 2);
        assert!(Saw::radial(&a, right, vec![Site::new(-1, 0), Site::new(0, 0)]).is_err());
        assert!(Saw::new(vec![Site::new(0, 0), Site::new(1, 1)]).is_err());
        assert!(Saw::new(vec![Site::new(0, 0), Site::new(1, 0), Site::new(0, 0)]).is_err());
    }

    #[test]
    fn line_round_trip() {
        let s = Saw::new(vec![Site::new(0, 0), Site::new(0, -1), Site::new(1, -1)]).unwrap();
        assert_eq!(Saw::parse_line(&s.to_line()).unwrap(), s);
    }
}
