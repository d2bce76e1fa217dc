use std::cmp::Ordering;
use std::collections::VecDeque;

/// Two-sided utilities of a matching instance, by index. Index order is the
/// tie-break: on equal utility the lower index is preferred.
///
/// A pair `(i, j)` is acceptable when both sides have a utility for it; any
/// acceptable partner is preferred to staying single.
#[derive(Debug, Clone, PartialEq)]
pub struct Preferences {
    /// `tx[i][j]`: utility of transmitter `i` for receiver `j`.
    pub tx: Vec<Vec<Option<f64>>>,
    /// `rx[j][i]`: utility of receiver `j` for transmitter `i`.
    pub rx: Vec<Vec<Option<f64>>>,
}

impl Preferences {
    pub fn new(n_tx: usize, n_rx: usize) -> Self {
        Preferences {
            tx: vec![vec![None; n_rx]; n_tx],
            rx: vec![vec![None; n_tx]; n_rx],
        }
    }

    pub fn set(&mut self, i: usize, j: usize, tx_utility: f64, rx_utility: f64) {
        self.tx[i][j] = Some(tx_utility);
        self.rx[j][i] = Some(rx_utility);
    }

    pub fn n_tx(&self) -> usize {
        self.tx.len()
    }

    pub fn n_rx(&self) -> usize {
        self.rx.len()
    }

    pub fn acceptable(&self, i: usize, j: usize) -> bool {
        self.tx[i][j].is_some() && self.rx[j][i].is_some()
    }

    /// Ordering of receivers `a` vs `b` from transmitter `i`'s view
    /// (`Greater` = `a` preferred).
    fn tx_cmp(&self, i: usize, a: usize, b: usize) -> Ordering {
        let (ua, ub) = (self.tx[i][a].unwrap(), self.tx[i][b].unwrap());
        ua.total_cmp(&ub).then(b.cmp(&a))
    }

    fn rx_cmp(&self, j: usize, a: usize, b: usize) -> Ordering {
        let (ua, ub) = (self.rx[j][a].unwrap(), self.rx[j][b].unwrap());
        ua.total_cmp(&ub).then(b.cmp(&a))
    }

    /// Whether transmitter `i` strictly prefers `j` to its current state.
    pub fn tx_prefers(&self, i: usize, j: usize, current: Option<usize>) -> bool {
        current.is_none_or(|c| self.tx_cmp(i, j, c) == Ordering::Greater)
    }

    pub fn rx_prefers(&self, j: usize, i: usize, current: Option<usize>) -> bool {
        current.is_none_or(|c| self.rx_cmp(j, i, c) == Ordering::Greater)
    }

    /// Acceptable transmitters of receiver `j`, best first.
    pub fn rx_ranking(&self, j: usize) -> Vec<usize> {
        let mut l: Vec<usize> = (0..self.n_tx()).filter(|&i| self.acceptable(i, j)).collect();
        l.sort_by(|&a, &b| self.rx_cmp(j, b, a));
        l
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DaOutcome {
    pub tx_of_rx: Vec<Option<usize>>,
    pub rx_of_tx: Vec<Option<usize>>,
    pub proposals: usize,
}

impl DaOutcome {
    /// Matched `(tx, rx)` index pairs, ascending by transmitter.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.rx_of_tx
            .iter()
            .enumerate()
            .filter_map(|(i, j)| j.map(|j| (i, j)))
            .collect()
    }
}

/// Receiver-proposing deferred acceptance.
pub fn deferred_acceptance(p: &Preferences) -> DaOutcome {
    let rankings: Vec<Vec<usize>> = (0..p.n_rx()).map(|j| p.rx_ranking(j)).collect();
    let mut next = vec![0usize; p.n_rx()];
    let mut held: Vec<Option<usize>> = vec![None; p.n_tx()];
    let mut free: VecDeque<usize> = (0..p.n_rx()).collect();
    let mut proposals = 0;
    while let Some(j) = free.pop_front() {
        let Some(&i) = rankings[j].get(next[j]) else {
            continue;
        };
        next[j] += 1;
        proposals += 1;
        match held[i] {
            None => held[i] = Some(j),
            Some(k) if p.tx_prefers(i, j, Some(k)) => {
                held[i] = Some(j);
                free.push_back(k);
            }
            Some(_) => free.push_back(j),
        }
    }
    let mut tx_of_rx = vec![None; p.n_rx()];
    for (i, j) in held.iter().enumerate() {
        if let Some(j) = j {
            tx_of_rx[*j] = Some(i);
        }
    }
    DaOutcome {
        tx_of_rx,
        rx_of_tx: held,
        proposals,
    }
}

/// Acceptable pairs that would both rather be matched to each other.
pub fn blocking_pairs(p: &Preferences, tx_of_rx: &[Option<usize>]) -> Vec<(usize, usize)> {
    let mut rx_of_tx = vec![None; p.n_tx()];
    for (j, i) in tx_of_rx.iter().enumerate() {
        if let Some(i) = i {
            rx_of_tx[*i] = Some(j);
        }
    }
    let mut out = Vec::new();
    for i in 0..p.n_tx() {
        for j in 0..p.n_rx() {
            if p.acceptable(i, j)
                && rx_of_tx[i] != Some(j)
                && p.tx_prefers(i, j, rx_of_tx[i])
                && p.rx_prefers(j, i, tx_of_rx[j])
            {
                out.push((i, j));
            }
        }
    }
    out
}

/// Individually rational (only acceptable pairs) and free of blocking pairs.
pub fn is_stable(p: &Preferences, tx_of_rx: &[Option<usize>]) -> bool {
    let rational = tx_of_rx
        .iter()
        .enumerate()
        .all(|(j, i)| i.is_none_or(|i| p.acceptable(i, j)));
    rational && blocking_pairs(p, tx_of_rx).is_empty()
}

/// Every stable matching, by exhaustive enumeration. Exponential; intended
/// for small instances.
pub fn stable_matchings(p: &Preferences) -> Vec<Vec<Option<usize>>> {
    fn rec(p: &Preferences, j: usize, used: &mut [bool], cur: &mut Vec<Option<usize>>, out: &mut Vec<Vec<Option<usize>>>) {
        if j == p.n_rx() {
            if blocking_pairs(p, cur).is_empty() {
                out.push(cur.clone());
            }
            return;
        }
        cur.push(None);
        rec(p, j + 1, used, cur, out);
        cur.pop();
        for i in 0..p.n_tx() {
            if !used[i] && p.acceptable(i, j) {
                used[i] = true;
                cur.push(Some(i));
                rec(p, j + 1, used, cur, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(p, 0, &mut vec![false; p.n_tx()], &mut Vec::new(), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_instance(n_tx: usize, n_rx: usize, cells: &[(f64, f64, bool)]) -> Preferences {
        let mut p = Preferences::new(n_tx, n_rx);
        for i in 0..n_tx {
            for j in 0..n_rx {
                let (a, b, ok) = cells[(i * n_rx + j) % cells.len()];
                if ok {
                    p.set(i, j, a, b);
                }
            }
        }
        p
    }

    #[test]
    fn one_by_one() {
        let mut p = Preferences::new(1, 1);
        p.set(0, 0, -1.0, -1.0);
        let o = deferred_acceptance(&p);
        assert_eq!(o.pairs(), vec![(0, 0)]);
    }

    #[test]
    fn empty_and_unacceptable() {
        let o = deferred_acceptance(&Preferences::new(0, 3));
        assert_eq!(o.tx_of_rx, vec![None; 3]);
        let o = deferred_acceptance(&Preferences::new(2, 2));
        assert!(o.pairs().is_empty());
        assert_eq!(o.proposals, 0);
    }

    #[test]
    fn aligned_two_by_two() {
        // both receivers prefer A (index 0); A prefers receiver 1 (index 0)
        let mut p = Preferences::new(2, 2);
        p.set(0, 0, -1.0, -1.0);
        p.set(0, 1, -2.0, -1.0);
        p.set(1, 0, -1.0, -2.0);
        p.set(1, 1, -1.0, -2.0);
        let o = deferred_acceptance(&p);
        assert_eq!(o.pairs(), vec![(0, 0), (1, 1)]);
        let all = stable_matchings(&p);
        assert_eq!(all, vec![vec![Some(0), Some(1)]]);
    }

    #[test]
    fn ties_break_toward_lower_index() {
        let mut p = Preferences::new(2, 1);
        p.set(0, 0, -1.0, -1.0);
        p.set(1, 0, -1.0, -1.0);
        assert_eq!(deferred_acceptance(&p).tx_of_rx, vec![Some(0)]);
    }

    #[test]
    fn blocking_pair_detected() {
        let mut p = Preferences::new(2, 2);
        p.set(0, 0, -1.0, -1.0);
        p.set(0, 1, -2.0, -2.0);
        p.set(1, 0, -2.0, -2.0);
        p.set(1, 1, -1.0, -1.0);
        // swapped assignment: (0,1), (1,0) is blocked by (0,0)
        assert_eq!(blocking_pairs(&p, &[Some(1), Some(0)]), vec![(0, 0), (1, 1)]);
        assert!(is_stable(&p, &[Some(0), Some(1)]));
        // leaving everybody single is blocked by every acceptable pair
        assert_eq!(blocking_pairs(&p, &[None, None]).len(), 4);
    }

    proptest! {
        #[test]
        fn da_is_stable_and_receiver_optimal(
            n_tx in 0usize..=6,
            n_rx in 0usize..=6,
            cells in prop::collection::vec((-10.0f64..-0.01, -10.0f64..-0.01, prop::bool::weighted(0.75)), 36),
        ) {
            let p = random_instance(n_tx, n_rx, &cells);
            let o = deferred_acceptance(&p);
            prop_assert!(is_stable(&p, &o.tx_of_rx));
            prop_assert!(o.proposals <= n_tx * n_rx);
            let all = stable_matchings(&p);
            prop_assert!(all.contains(&o.tx_of_rx));
            for m in &all {
                for j in 0..n_rx {
                    // the receiver never strictly prefers its partner in another stable matching
                    if let Some(i) = m[j] {
                        prop_assert!(!p.rx_prefers(j, i, o.tx_of_rx[j]) || o.tx_of_rx[j] == Some(i));
                    }
                }
            }
        }

        #[test]
        fn positive_scaling_keeps_outcome(
            cells in prop::collection::vec((-10.0f64..-0.01, -10.0f64..-0.01, prop::bool::weighted(0.8)), 25),
            k in 0.001f64..1000.0,
        ) {
            let p = random_instance(5, 5, &cells);
            let mut q = p.clone();
            for row in q.tx.iter_mut().chain(q.rx.iter_mut()) {
                for u in row.iter_mut().flatten() {
                    *u *= k;
                }
            }
            prop_assert_eq!(deferred_acceptance(&p).tx_of_rx, deferred_acceptance(&q).tx_of_rx);
        }
    }
}
