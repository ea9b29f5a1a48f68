//! DOT and CSV views of a task's causal structure.

use std::fmt::Write;

use crate::geometry::SpacetimePoint;
use crate::task::SummoningTask;

/// `s`, then `c_i`, then `r_i`.
pub fn labelled_points(task: &SummoningTask) -> Vec<(String, &SpacetimePoint)> {
    let mut pts = vec![("s".to_string(), &task.start)];
    pts.extend(task.pairs.iter().enumerate().map(|(k, d)| (format!("c{}", k + 1), &d.call)));
    pts.extend(task.pairs.iter().enumerate().map(|(k, d)| (format!("r{}", k + 1), &d.ret)));
    pts
}

/// Strict order: `a <= b` and not `b <= a`. Coincident points are unrelated.
fn strict(task: &SummoningTask, a: &SpacetimePoint, b: &SpacetimePoint) -> bool {
    task.leq(a, b) && !task.leq(b, a)
}

/// Pairs `(a, b)` of point indices with `a < b`.
pub fn causal_pairs(task: &SummoningTask) -> Vec<(usize, usize)> {
    let pts = labelled_points(task);
    let mut out = Vec::new();
    for a in 0..pts.len() {
        for b in 0..pts.len() {
            if a != b && strict(task, pts[a].1, pts[b].1) {
                out.push((a, b));
            }
        }
    }
    out
}

/// Covering pairs of the strict order: `a < b` with nothing strictly between.
pub fn covering_pairs(task: &SummoningTask) -> Vec<(usize, usize)> {
    let pts = labelled_points(task);
    causal_pairs(task)
        .into_iter()
        .filter(|&(a, b)| {
            !(0..pts.len()).any(|m| m != a && m != b && strict(task, pts[a].1, pts[m].1) && strict(task, pts[m].1, pts[b].1))
        })
        .collect()
}

fn coords(p: &SpacetimePoint) -> String {
    let xs: Vec<String> = p.x.iter().map(|v| v.to_string()).collect();
    xs.join(",")
}

pub fn to_dot(task: &SummoningTask) -> String {
    let pts = labelled_points(task);
    let mut s = String::from("digraph causal {\n  rankdir=BT;\n");
    for (label, p) in &pts {
        let shape = match label.as_bytes()[0] {
            b's' => "doublecircle",
            b'c' => "box",
            _ => "ellipse",
        };
        writeln!(s, "  {label} [shape={shape}, label=\"{label}\\nt={} x=({})\"];", p.t, coords(p)).unwrap();
    }
    for (a, b) in covering_pairs(task) {
        writeln!(s, "  {} -> {};", pts[a].0, pts[b].0).unwrap();
    }
    s.push_str("}\n");
    s
}

/// One `point` row per labelled point and one `causal` row per strictly
/// ordered pair.
pub fn to_csv(task: &SummoningTask) -> String {
    let pts = labelled_points(task);
    let mut s = String::from("record,label,to,t");
    for k in 1..=task.dim {
        write!(s, ",x{k}").unwrap();
    }
    s.push('\n');
    for (label, p) in &pts {
        write!(s, "point,{label},,{}", p.t).unwrap();
        for k in 0..task.dim {
            match p.x.get(k) {
                Some(v) => write!(s, ",{v}").unwrap(),
                None => s.push(','),
            }
        }
        s.push('\n');
    }
    for (a, b) in causal_pairs(task) {
        write!(s, "causal,{},{},", pts[a].0, pts[b].0).unwrap();
        s.push_str(&",".repeat(task.dim));
        s.push('\n');
    }
    s
}
