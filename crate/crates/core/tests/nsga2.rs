mod common;

use common::rng;
use hashgp::evolve::{crowding_distance, dominates, fast_nondominated_sort};
use rand::Rng;

fn brute_dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y) && a.iter().zip(b).any(|(x, y)| x > y)
}

/// Peels off the non-dominated set repeatedly.
fn brute_fronts(objs: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let mut left: Vec<usize> = (0..objs.len()).collect();
    let mut fronts = Vec::new();
    while !left.is_empty() {
        let front: Vec<usize> = left
            .iter()
            .copied()
            .filter(|&i| !left.iter().any(|&j| brute_dominates(&objs[j], &objs[i])))
            .collect();
        left.retain(|i| !front.contains(i));
        fronts.push(front);
    }
    fronts
}

fn brute_crowding(objs: &[Vec<f64>], front: &[usize]) -> Vec<f64> {
    let m = front.len();
    let mut out = vec![0.0; m];
    for k in 0..objs[front[0]].len() {
        let mut pairs: Vec<(f64, usize)> = (0..m).map(|p| (objs[front[p]][k], p)).collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let span = pairs[m - 1].0 - pairs[0].0;
        if span == 0.0 {
            continue;
        }
        out[pairs[0].1] = f64::INFINITY;
        out[pairs[m - 1].1] = f64::INFINITY;
        for w in 1..m.saturating_sub(1) {
            out[pairs[w].1] += (pairs[w + 1].0 - pairs[w - 1].0) / span;
        }
    }
    out
}

fn population(r: &mut impl Rng) -> Vec<Vec<f64>> {
    let n = r.random_range(1..=200);
    // coarse grids produce plenty of ties and duplicates
    let levels = [3.0, 10.0, 1000.0][r.random_range(0..3)];
    (0..n)
        .map(|_| (0..2).map(|_| (r.random::<f64>() * levels).floor() / levels).collect())
        .collect()
}

#[test]
fn sorting_and_crowding_match_brute_force() {
    let mut r = rng(17);
    for _ in 0..1000 {
        let objs = population(&mut r);
        let fronts = fast_nondominated_sort(&objs);
        assert_eq!(fronts, brute_fronts(&objs));
        assert_eq!(fronts.iter().map(Vec::len).sum::<usize>(), objs.len());
        for front in &fronts {
            for &a in front {
                for &b in front {
                    assert!(!dominates(&objs[a], &objs[b]));
                }
            }
            let got = crowding_distance(&objs, front);
            let want = brute_crowding(&objs, front);
            for (g, w) in got.iter().zip(&want) {
                assert!(g == w || (g - w).abs() <= 1e-12, "{g} vs {w}");
            }
        }
    }
}

#[test]
fn identical_points_share_the_first_front() {
    let objs = vec![vec![0.5, 0.5]; 6];
    assert_eq!(fast_nondominated_sort(&objs), vec![(0..6).collect::<Vec<_>>()]);
    assert_eq!(crowding_distance(&objs, &[0, 1, 2, 3, 4, 5]), vec![0.0; 6]);
}

#[test]
fn dominance_is_strict() {
    assert!(dominates(&[1.0, 1.0], &[1.0, 0.5]));
    assert!(!dominates(&[1.0, 1.0], &[1.0, 1.0]));
    assert!(!dominates(&[1.0, 0.0], &[0.0, 1.0]));
}
