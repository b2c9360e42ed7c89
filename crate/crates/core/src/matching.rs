//! Two-sided one-to-one matching between CEUs and D2D pairs.
//!
//! CEUs propose. Preference lists only hold acceptable partners, and
//! acceptability is mutual: CEU `i` lists D2D pair `j` exactly when `j`
//! lists `i`. Being unmatched ranks below every acceptable partner and
//! above every unacceptable one.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::channel::Topology;
use crate::stackelberg::PairOutcome;
use crate::{Error, Result};

/// Ranked acceptable partners of one agent, most preferred first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreferenceList {
    pub owner: usize,
    pub ranked: Vec<usize>,
}

impl PreferenceList {
    pub fn new(owner: usize, ranked: Vec<usize>) -> Self {
        Self { owner, ranked }
    }

    /// Position of `partner` in the list, `None` if unacceptable.
    pub fn rank_of(&self, partner: usize) -> Option<usize> {
        self.ranked.iter().position(|&p| p == partner)
    }

    pub fn accepts(&self, partner: usize) -> bool {
        self.ranked.contains(&partner)
    }

    /// True iff `candidate` is acceptable and strictly preferred to `current`
    /// (where `None` means unmatched).
    pub fn prefers(&self, candidate: usize, current: Option<usize>) -> bool {
        match (self.rank_of(candidate), current) {
            (None, _) => false,
            (Some(_), None) => true,
            (Some(a), Some(cur)) => self.rank_of(cur).is_none_or(|b| a < b),
        }
    }
}

/// Partial one-to-one assignment, stored in both directions.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Matching {
    ceu_to_d2d: Vec<Option<usize>>,
    d2d_to_ceu: Vec<Option<usize>>,
}

impl Matching {
    pub fn empty(ceus: usize, d2ds: usize) -> Self {
        Self {
            ceu_to_d2d: vec![None; ceus],
            d2d_to_ceu: vec![None; d2ds],
        }
    }

    /// Builds a matching from `(ceu, d2d)` pairs, rejecting any agent used twice.
    pub fn from_pairs(ceus: usize, d2ds: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut m = Self::empty(ceus, d2ds);
        for &(i, j) in pairs {
            if i >= ceus || j >= d2ds {
                return Err(Error::InvalidParameter(format!("pair ({i}, {j}) out of range")));
            }
            if m.ceu_to_d2d[i].is_some() || m.d2d_to_ceu[j].is_some() {
                return Err(Error::InvalidParameter(format!("pair ({i}, {j}) reuses an agent")));
            }
            m.link(i, j);
        }
        Ok(m)
    }

    fn link(&mut self, ceu: usize, d2d: usize) {
        self.ceu_to_d2d[ceu] = Some(d2d);
        self.d2d_to_ceu[d2d] = Some(ceu);
    }

    pub fn ceu_count(&self) -> usize {
        self.ceu_to_d2d.len()
    }

    pub fn d2d_count(&self) -> usize {
        self.d2d_to_ceu.len()
    }

    pub fn partner_of_ceu(&self, ceu: usize) -> Option<usize> {
        self.ceu_to_d2d[ceu]
    }

    pub fn partner_of_d2d(&self, d2d: usize) -> Option<usize> {
        self.d2d_to_ceu[d2d]
    }

    /// Matched `(ceu, d2d)` pairs in CEU order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.ceu_to_d2d
            .iter()
            .enumerate()
            .filter_map(|(i, j)| j.map(|j| (i, j)))
    }

    pub fn matched_count(&self) -> usize {
        self.pairs().count()
    }
}

fn cmp_desc(a: f64, b: f64) -> std::cmp::Ordering {
    b.total_cmp(&a)
}

/// Preference lists from a CEU x D2D table of pair outcomes.
///
/// A pair is mutually acceptable iff its outcome is feasible and the DT is
/// within `relay_range` of the CEU. CEUs rank by leader utility, then CEU
/// rate; D2D pairs by follower utility, then D2D rate; remaining ties go to
/// the lower index.
pub fn build_preferences(
    outcomes: &[Vec<PairOutcome>],
    topology: &Topology,
    relay_range: f64,
) -> (Vec<PreferenceList>, Vec<PreferenceList>) {
    let m = topology.ceu_count();
    let n = topology.d2d_count();
    let acceptable =
        |i: usize, j: usize| outcomes[i][j].feasible && topology.ceu_dt_distance(i, j) <= relay_range;

    let ceu_prefs = (0..m)
        .map(|i| {
            let mut ranked: Vec<usize> = (0..n).filter(|&j| acceptable(i, j)).collect();
            ranked.sort_by(|&a, &b| {
                let (oa, ob) = (&outcomes[i][a], &outcomes[i][b]);
                cmp_desc(oa.u_ceu, ob.u_ceu)
                    .then(cmp_desc(oa.r_ceu, ob.r_ceu))
                    .then(a.cmp(&b))
            });
            PreferenceList::new(i, ranked)
        })
        .collect();

    let d2d_prefs = (0..n)
        .map(|j| {
            let mut ranked: Vec<usize> = (0..m).filter(|&i| acceptable(i, j)).collect();
            ranked.sort_by(|&a, &b| {
                let (oa, ob) = (&outcomes[a][j], &outcomes[b][j]);
                cmp_desc(oa.u_d2d, ob.u_d2d)
                    .then(cmp_desc(oa.r_d2d, ob.r_d2d))
                    .then(a.cmp(&b))
            });
            PreferenceList::new(j, ranked)
        })
        .collect();

    (ceu_prefs, d2d_prefs)
}

fn validate(ceu_prefs: &[PreferenceList], d2d_prefs: &[PreferenceList]) -> Result<()> {
    let check_side = |prefs: &[PreferenceList], side: &str, other: usize| -> Result<()> {
        for (idx, list) in prefs.iter().enumerate() {
            if list.owner != idx {
                return Err(Error::MalformedPreferences(format!(
                    "{side} list at position {idx} is owned by {}",
                    list.owner
                )));
            }
            let mut seen = vec![false; other];
            for &p in &list.ranked {
                if p >= other {
                    return Err(Error::MalformedPreferences(format!(
                        "{side} {idx} lists partner {p}, only {other} exist"
                    )));
                }
                if std::mem::replace(&mut seen[p], true) {
                    return Err(Error::MalformedPreferences(format!(
                        "{side} {idx} lists partner {p} twice"
                    )));
                }
            }
        }
        Ok(())
    };
    check_side(ceu_prefs, "CEU", d2d_prefs.len())?;
    check_side(d2d_prefs, "D2D pair", ceu_prefs.len())?;

    for list in ceu_prefs {
        for &j in &list.ranked {
            if !d2d_prefs[j].accepts(list.owner) {
                return Err(Error::MalformedPreferences(format!(
                    "CEU {} accepts D2D pair {j} but not vice versa",
                    list.owner
                )));
            }
        }
    }
    for list in d2d_prefs {
        for &i in &list.ranked {
            if !ceu_prefs[i].accepts(list.owner) {
                return Err(Error::MalformedPreferences(format!(
                    "D2D pair {} accepts CEU {i} but not vice versa",
                    list.owner
                )));
            }
        }
    }
    Ok(())
}

/// One synchronous round of deferred acceptance.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ProposalRound {
    /// `(ceu, d2d)` proposals made this round.
    pub proposals: Vec<(usize, usize)>,
    /// `(ceu, d2d)`: CEU rejected by the D2D pair this round, including
    /// previously held CEUs that were displaced.
    pub rejections: Vec<(usize, usize)>,
    /// Tentative `(ceu, d2d)` holds at the end of the round.
    pub held: Vec<(usize, usize)>,
}

/// CEU-proposing deferred acceptance; the result is the CEU-optimal stable matching.
pub fn deferred_acceptance(
    ceu_prefs: &[PreferenceList],
    d2d_prefs: &[PreferenceList],
) -> Result<Matching> {
    deferred_acceptance_traced(ceu_prefs, d2d_prefs).map(|(m, _)| m)
}

/// Deferred acceptance that also returns the round-by-round log.
///
/// Each round every free CEU with a non-empty remaining list proposes to its
/// favourite remaining D2D pair; every D2D pair keeps the best of its
/// current hold and new proposers and rejects the rest; rejected CEUs strike
/// that pair. Stops when a round has no proposals.
pub fn deferred_acceptance_traced(
    ceu_prefs: &[PreferenceList],
    d2d_prefs: &[PreferenceList],
) -> Result<(Matching, Vec<ProposalRound>)> {
    validate(ceu_prefs, d2d_prefs)?;
    let m = ceu_prefs.len();
    let n = d2d_prefs.len();

    // rank_table[j][i] = position of CEU i on D2D j's list
    let rank_table: Vec<Vec<usize>> = d2d_prefs
        .iter()
        .map(|list| {
            let mut ranks = vec![usize::MAX; m];
            for (r, &i) in list.ranked.iter().enumerate() {
                ranks[i] = r;
            }
            ranks
        })
        .collect();

    let mut next = vec![0usize; m];
    let mut held_by: Vec<Option<usize>> = vec![None; n];
    let mut holding: Vec<Option<usize>> = vec![None; m];
    let mut rounds = Vec::new();

    loop {
        let proposals: Vec<(usize, usize)> = (0..m)
            .filter(|&i| holding[i].is_none())
            .filter_map(|i| ceu_prefs[i].ranked.get(next[i]).map(|&j| (i, j)))
            .collect();
        if proposals.is_empty() {
            break;
        }

        let mut applicants: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(i, j) in &proposals {
            applicants[j].push(i);
        }

        let mut rejections = Vec::new();
        for (j, new) in applicants.iter().enumerate() {
            if new.is_empty() {
                continue;
            }
            let pool = held_by[j].into_iter().chain(new.iter().copied());
            let best = pool
                .clone()
                .min_by_key(|&i| (rank_table[j][i], i))
                .expect("non-empty pool");
            for i in pool.filter(|&i| i != best) {
                rejections.push((i, j));
                holding[i] = None;
                next[i] += 1;
            }
            held_by[j] = Some(best);
            holding[best] = Some(j);
        }
        rejections.sort_unstable();

        let held = (0..m).filter_map(|i| holding[i].map(|j| (i, j))).collect();
        rounds.push(ProposalRound {
            proposals,
            rejections,
            held,
        });
    }

    let mut matching = Matching::empty(m, n);
    for (i, j) in holding.iter().enumerate() {
        if let Some(j) = *j {
            matching.link(i, j);
        }
    }
    Ok((matching, rounds))
}

/// Why a CEU / D2D pair destabilizes a matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum InstabilityKind {
    /// Both sides strictly prefer each other to their current partners.
    Blocking,
    /// The pair is matched although at least one side finds the other unacceptable.
    Unacceptable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct BlockingPair {
    pub ceu: usize,
    pub d2d: usize,
    pub kind: InstabilityKind,
}

/// All blocking pairs and individual-rationality violations of `matching`.
pub fn find_blocking_pairs(
    matching: &Matching,
    ceu_prefs: &[PreferenceList],
    d2d_prefs: &[PreferenceList],
) -> Vec<BlockingPair> {
    let mut out = Vec::new();
    for (i, j) in matching.pairs() {
        if !ceu_prefs[i].accepts(j) || !d2d_prefs[j].accepts(i) {
            out.push(BlockingPair {
                ceu: i,
                d2d: j,
                kind: InstabilityKind::Unacceptable,
            });
        }
    }
    for (i, list) in ceu_prefs.iter().enumerate() {
        for &j in &list.ranked {
            if matching.partner_of_ceu(i) == Some(j) {
                continue;
            }
            if list.prefers(j, matching.partner_of_ceu(i))
                && d2d_prefs[j].prefers(i, matching.partner_of_d2d(j))
            {
                out.push(BlockingPair {
                    ceu: i,
                    d2d: j,
                    kind: InstabilityKind::Blocking,
                });
            }
        }
    }
    out
}

pub const ENUMERATION_LIMIT: usize = 8;

/// Every stable matching, by exhaustive search over acceptable partial matchings.
pub fn enumerate_stable_matchings(
    ceu_prefs: &[PreferenceList],
    d2d_prefs: &[PreferenceList],
) -> Result<Vec<Matching>> {
    let (m, n) = (ceu_prefs.len(), d2d_prefs.len());
    if m > ENUMERATION_LIMIT || n > ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            ceus: m,
            d2ds: n,
            limit: ENUMERATION_LIMIT,
        });
    }

    fn extend(
        i: usize,
        current: &mut Matching,
        ceu_prefs: &[PreferenceList],
        d2d_prefs: &[PreferenceList],
        out: &mut Vec<Matching>,
    ) {
        if i == ceu_prefs.len() {
            if find_blocking_pairs(current, ceu_prefs, d2d_prefs).is_empty() {
                out.push(current.clone());
            }
            return;
        }
        extend(i + 1, current, ceu_prefs, d2d_prefs, out);
        for &j in &ceu_prefs[i].ranked {
            if current.d2d_to_ceu[j].is_none() && d2d_prefs[j].accepts(i) {
                current.link(i, j);
                extend(i + 1, current, ceu_prefs, d2d_prefs, out);
                current.ceu_to_d2d[i] = None;
                current.d2d_to_ceu[j] = None;
            }
        }
    }

    let mut out = Vec::new();
    extend(0, &mut Matching::empty(m, n), ceu_prefs, d2d_prefs, &mut out);
    Ok(out)
}

/// Uniformly random one-to-one assignment. With `N < M` the CEUs left over
/// are a uniform subset. Pairs that are not mutually acceptable are dropped.
pub fn random_matching<R: Rng + ?Sized>(
    ceu_prefs: &[PreferenceList],
    d2d_prefs: &[PreferenceList],
    rng: &mut R,
) -> Matching {
    let (m, n) = (ceu_prefs.len(), d2d_prefs.len());
    let mut ceus: Vec<usize> = (0..m).collect();
    let mut d2ds: Vec<usize> = (0..n).collect();
    ceus.shuffle(rng);
    d2ds.shuffle(rng);

    let mut matching = Matching::empty(m, n);
    for (&i, &j) in ceus.iter().zip(&d2ds) {
        if ceu_prefs[i].accepts(j) && d2d_prefs[j].accepts(i) {
            matching.link(i, j);
        }
    }
    matching
}
