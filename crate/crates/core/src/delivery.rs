//! Round-based XOR delivery and its delivery time.
//!
//! In every round each served user occupies one virtual cache of its physical
//! cache. For every admissible `(t+1)`-tuple `τ` of virtual caches the server
//! broadcasts the XOR, over the occupied virtual caches `v ∈ τ`, of the
//! subpacket `τ \ v` of the file requested by the user sitting at `v`. Tuples
//! with no occupied virtual cache are skipped. A transmission is one
//! subpacket long, so the delivery time is `transmissions / S`.
//!
//! The closed form counts the skipped tuples directly: a round with
//! occupancy `r` skips `e_{t+1}(base - r)` of the `e_{t+1}(base)` tuples.

use std::fmt::Write as _;

use num_bigint::BigUint;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::exact::{self, Rational};
use crate::model::{CacheLayout, PopulationInstance};
use crate::partition::{self, RoundKind};
use crate::placement::{self, PlacementMap, SubpacketLabel};

/// Everything needed to run deliveries on one layout and budget: the
/// placement plus the coded `(t+1)`-tuples with the subpacket index each
/// position asks for.
#[derive(Debug, Clone)]
pub struct Scheme {
    layout: CacheLayout,
    placement: PlacementMap,
    coded: Vec<SubpacketLabel>,
    // coded_parts[i][pos] = tuple index of coded[i] without position pos
    coded_parts: Vec<Vec<usize>>,
}

impl Scheme {
    pub fn new(layout: CacheLayout, t: usize, files: u64, max_tuples: u64) -> Result<Self> {
        let placement = placement::build_placement(&layout, t, files, max_tuples)?;
        let coded = placement::enumerate_tuples(&layout, t + 1, max_tuples)?;
        let coded_parts = coded
            .iter()
            .map(|tau| {
                (0..tau.len())
                    .map(|pos| {
                        placement
                            .index_of(&tau.without_position(pos))
                            .expect("sub-tuple of an admissible tuple is admissible")
                    })
                    .collect()
            })
            .collect();
        Ok(Scheme {
            layout,
            placement,
            coded,
            coded_parts,
        })
    }

    pub fn layout(&self) -> &CacheLayout {
        &self.layout
    }

    pub fn placement(&self) -> &PlacementMap {
        &self.placement
    }

    pub fn budget(&self) -> usize {
        self.placement.budget()
    }

    /// The admissible `(t+1)`-tuples in lexicographic order.
    pub fn coded_tuples(&self) -> &[SubpacketLabel] {
        &self.coded
    }
}

/// One XOR term: `user` wants subpacket `subpacket` of `file`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Term {
    pub user: usize,
    pub file: usize,
    pub subpacket: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transmission {
    /// Index into [`Scheme::coded_tuples`].
    pub coded_tuple: usize,
    pub terms: Vec<Term>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Round {
    pub population: Vec<u64>,
    pub kind: RoundKind,
    /// Caches with fewer users than virtual caches in this round.
    pub deficit: Vec<usize>,
    pub transmissions: Vec<Transmission>,
    /// Coded tuples skipped because they serve nobody.
    pub pruned: usize,
}

#[derive(Debug, Clone)]
pub struct DeliveryTrace {
    rounds: Vec<Round>,
    coded: Vec<SubpacketLabel>,
    subpacketization: usize,
}

impl DeliveryTrace {
    pub fn rounds(&self) -> &[Round] {
        &self.rounds
    }

    pub fn transmissions(&self) -> impl Iterator<Item = &Transmission> {
        self.rounds.iter().flat_map(|r| r.transmissions.iter())
    }

    pub fn total_transmissions(&self) -> usize {
        self.rounds.iter().map(|r| r.transmissions.len()).sum()
    }

    pub fn subpacketization(&self) -> usize {
        self.subpacketization
    }

    pub fn coded_tuple(&self, index: usize) -> &SubpacketLabel {
        &self.coded[index]
    }

    /// Delivery time in file units.
    pub fn delay(&self) -> Rational {
        exact::ratio(
            BigUint::from(self.total_transmissions()),
            BigUint::from(self.subpacketization),
        )
    }

    /// One line per transmission, `round,tau,terms`, where terms are
    /// `user:file:tuple` joined by `;`. Everything is 1-based.
    pub fn write_dump<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        for (r, round) in self.rounds.iter().enumerate() {
            for tx in &round.transmissions {
                let mut terms = String::new();
                for (i, term) in tx.terms.iter().enumerate() {
                    if i > 0 {
                        terms.push(';');
                    }
                    write!(
                        terms,
                        "{}:{}:{}",
                        term.user + 1,
                        term.file + 1,
                        term.subpacket + 1
                    )
                    .expect("string write");
                }
                writeln!(out, "{},{},{}", r + 1, self.coded[tx.coded_tuple], terms)?;
            }
        }
        Ok(())
    }
}

/// Occupant of every virtual cache in one round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Seating {
    occupant: Vec<Option<usize>>,
}

impl Seating {
    pub fn occupant(&self, virtual_cache: usize) -> Option<usize> {
        self.occupant[virtual_cache]
    }

    pub fn seat_of(&self, user: usize) -> Option<usize> {
        self.occupant.iter().position(|&o| o == Some(user))
    }

    pub fn occupied(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.occupant
            .iter()
            .enumerate()
            .filter_map(|(v, o)| o.map(|u| (v, u)))
    }
}

/// Seats the `i`-th round user of cache `λ` at the `i`-th virtual cache of `λ`.
pub fn assign_virtual_seats(
    round: &[u64],
    round_users: &[Vec<usize>],
    layout: &CacheLayout,
) -> Result<Seating> {
    layout.check_population(round)?;
    let mut occupant = vec![None; layout.virtual_count()];
    for (cache, users) in round_users.iter().enumerate() {
        let seats = layout.virtual_range(cache);
        if users.len() > seats.len() || users.len() as u64 != round[cache] {
            return Err(Error::TooManyUsersForRound {
                cache: cache + 1,
                users: users.len(),
                seats: layout.base()[cache],
            });
        }
        for (seat, &user) in seats.zip(users) {
            occupant[seat] = Some(user);
        }
    }
    Ok(Seating { occupant })
}

/// XOR transmissions of one round, in coded-tuple order, skipping tuples
/// that serve nobody.
pub fn generate_round(seating: &Seating, demands: &[usize], scheme: &Scheme) -> Vec<Transmission> {
    scheme
        .coded
        .iter()
        .zip(&scheme.coded_parts)
        .enumerate()
        .filter_map(|(i, (tau, parts))| {
            let terms: Vec<Term> = tau
                .virtual_caches()
                .iter()
                .zip(parts)
                .filter_map(|(&v, &subpacket)| {
                    seating.occupant(v).map(|user| Term {
                        user,
                        file: demands[user],
                        subpacket,
                    })
                })
                .collect();
            (!terms.is_empty()).then_some(Transmission {
                coded_tuple: i,
                terms,
            })
        })
        .collect()
}

/// Runs the whole delivery for an instance and checks the transmission count
/// against [`delay_formula`].
pub fn simulate_delivery(instance: &PopulationInstance, scheme: &Scheme) -> Result<DeliveryTrace> {
    let trace = deliver(instance, scheme)?;
    let formula = delay_formula(instance.population(), scheme.layout(), scheme.budget());
    if trace.delay() != formula {
        return Err(Error::DelayMismatch {
            simulated: exact::format_fraction(&trace.delay()),
            formula: exact::format_fraction(&formula),
        });
    }
    Ok(trace)
}

/// Generates every round's transmissions for an instance, without the
/// closed-form cross-check.
pub fn deliver(instance: &PopulationInstance, scheme: &Scheme) -> Result<DeliveryTrace> {
    let layout = &scheme.layout;
    layout.check_population(instance.population())?;
    let plan = partition::partition_population(instance.population(), layout);
    let by_cache = instance.users_by_cache();
    let mut served: Vec<usize> = by_cache.iter().map(|r| r.start).collect();

    let mut rounds = Vec::with_capacity(plan.round_count());
    for round_vec in plan.rounds() {
        let round_users: Vec<Vec<usize>> = round_vec
            .iter()
            .enumerate()
            .map(|(cache, &count)| {
                let users = (served[cache]..served[cache] + count as usize).collect();
                served[cache] += count as usize;
                users
            })
            .collect();
        let seating = assign_virtual_seats(round_vec, &round_users, layout)?;
        let transmissions = generate_round(&seating, instance.demands(), scheme);
        let (kind, deficit) = partition::classify_round(round_vec, layout);
        rounds.push(Round {
            population: round_vec.clone(),
            kind,
            deficit,
            pruned: scheme.coded.len() - transmissions.len(),
            transmissions,
        });
    }

    Ok(DeliveryTrace {
        rounds,
        coded: scheme.coded.clone(),
        subpacketization: scheme.placement.subpacketization(),
    })
}

/// Closed-form delivery time for population `population` with budget `t`.
pub fn delay_formula(population: &[u64], layout: &CacheLayout, t: usize) -> Rational {
    let counter = TransmissionCounter::new(layout, t);
    exact::ratio(
        counter.count(population),
        counter.subpacketization().clone(),
    )
}

/// Closed-form number of transmissions for a population.
pub fn transmission_count(population: &[u64], layout: &CacheLayout, t: usize) -> BigUint {
    TransmissionCounter::new(layout, t).count(population)
}

/// Delivery time when the population equals the expected population:
/// `α · e_{t+1}(base) / e_t(base)`.
pub fn deterministic_delivery_time(layout: &CacheLayout, t: usize) -> Rational {
    let coded = exact::elementary_symmetric(layout.base(), t + 1);
    let s = exact::elementary_symmetric(layout.base(), t);
    exact::ratio(coded * layout.alpha(), s)
}

/// Transmission counter with the per-layout constants precomputed; used for
/// bulk evaluation.
#[derive(Debug, Clone)]
pub struct TransmissionCounter {
    base: Vec<u64>,
    t: usize,
    per_full_round: BigUint,
    per_full_round_small: Option<u128>,
    subpacketization: BigUint,
}

impl TransmissionCounter {
    pub fn new(layout: &CacheLayout, t: usize) -> Self {
        let base = layout.base().to_vec();
        let per_full_round_small = exact::elementary_symmetric_u128(&base, t + 1);
        TransmissionCounter {
            per_full_round: exact::elementary_symmetric(&base, t + 1),
            per_full_round_small,
            subpacketization: exact::elementary_symmetric(&base, t),
            base,
            t,
        }
    }

    pub fn subpacketization(&self) -> &BigUint {
        &self.subpacketization
    }

    /// Total transmissions over all rounds of `population`.
    pub fn count(&self, population: &[u64]) -> BigUint {
        assert_eq!(population.len(), self.base.len(), "population length");
        if let Some(small) = self.count_small(population) {
            return BigUint::from(small);
        }
        let mut total = BigUint::zero();
        let mut deficit = Vec::with_capacity(self.base.len());
        for j in 0..self.rounds(population) {
            self.round_deficit(population, j, &mut deficit);
            total += &self.per_full_round - exact::elementary_symmetric(&deficit, self.t + 1);
        }
        total
    }

    fn count_small(&self, population: &[u64]) -> Option<u128> {
        let full = self.per_full_round_small?;
        let mut total = 0u128;
        let mut deficit = Vec::with_capacity(self.base.len());
        for j in 0..self.rounds(population) {
            self.round_deficit(population, j, &mut deficit);
            let skipped = exact::elementary_symmetric_u128(&deficit, self.t + 1)?;
            total = total.checked_add(full - skipped)?;
        }
        Some(total)
    }

    fn rounds(&self, population: &[u64]) -> u64 {
        population
            .iter()
            .zip(&self.base)
            .map(|(&v, &b)| v.div_ceil(b))
            .max()
            .unwrap_or(0)
    }

    // Unoccupied virtual caches of every cache with a deficit in round j
    // (caches without a deficit contribute a zero factor and are left out).
    fn round_deficit(&self, population: &[u64], j: u64, deficit: &mut Vec<u64>) {
        deficit.clear();
        for (&v, &b) in population.iter().zip(&self.base) {
            let occupied = v.saturating_sub(j * b).min(b);
            if occupied < b {
                deficit.push(b - occupied);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::placement::DEFAULT_MAX_TUPLES;
    use num_bigint::BigInt;

    fn frac(n: i64, d: i64) -> Rational {
        Rational::new(BigInt::from(n), BigInt::from(d))
    }

    fn example_scheme() -> Scheme {
        let layout = CacheLayout::from_expected(&[4, 2, 2, 2]).unwrap();
        Scheme::new(layout, 2, 10, DEFAULT_MAX_TUPLES).unwrap()
    }

    #[test]
    fn worked_example_delay() {
        let layout = CacheLayout::from_expected(&[4, 2, 2, 2]).unwrap();
        assert_eq!(delay_formula(&[6, 2, 1, 1], &layout, 2), frac(20, 9));
        assert_eq!(delay_formula(&[4, 2, 2, 2], &layout, 2), frac(14, 9));
        assert_eq!(delay_formula(&[0, 0, 0, 0], &layout, 2), frac(0, 1));
        assert_eq!(deterministic_delivery_time(&layout, 2), frac(14, 9));
    }

    #[test]
    fn worked_example_seats() {
        let scheme = example_scheme();
        let seating = assign_virtual_seats(
            &[2, 1, 1, 1],
            &[vec![0, 1], vec![6], vec![8], vec![9]],
            scheme.layout(),
        )
        .unwrap();
        assert_eq!(
            seating.occupied().collect::<Vec<_>>(),
            vec![(0, 0), (1, 1), (2, 6), (3, 8), (4, 9)]
        );
        let seating = assign_virtual_seats(
            &[2, 0, 0, 0],
            &[vec![4, 5], vec![], vec![], vec![]],
            scheme.layout(),
        )
        .unwrap();
        assert_eq!(seating.occupied().collect::<Vec<_>>(), vec![(0, 4), (1, 5)]);
    }

    #[test]
    fn seat_overflow_is_rejected() {
        let scheme = example_scheme();
        let err = assign_virtual_seats(
            &[3, 0, 0, 0],
            &[vec![0, 1, 2], vec![], vec![], vec![]],
            scheme.layout(),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::TooManyUsersForRound {
                cache: 1,
                users: 3,
                seats: 2
            }
        ));
    }

    #[test]
    fn worked_example_rounds() {
        let scheme = example_scheme();
        let instance = PopulationInstance::worst_case(vec![6, 2, 1, 1]);
        let trace = simulate_delivery(&instance, &scheme).unwrap();
        let sizes: Vec<usize> = trace
            .rounds()
            .iter()
            .map(|r| r.transmissions.len())
            .collect();
        assert_eq!(sizes, vec![7, 7, 6]);
        assert_eq!(trace.delay(), frac(20, 9));

        // round 1: seven 3-term XORs
        assert!(trace.rounds()[0]
            .transmissions
            .iter()
            .all(|t| t.terms.len() == 3));
        // round 2: four 2-term XORs and three singletons
        let mut arity: Vec<usize> = trace.rounds()[1]
            .transmissions
            .iter()
            .map(|t| t.terms.len())
            .collect();
        arity.sort();
        assert_eq!(arity, vec![1, 1, 1, 2, 2, 2, 2]);
        // round 3: (3,4,5) pruned
        let round3 = &trace.rounds()[2];
        assert_eq!(round3.pruned, 1);
        assert!(round3
            .transmissions
            .iter()
            .all(|t| trace.coded_tuple(t.coded_tuple).to_string() != "3-4-5"));
    }

    #[test]
    fn worked_example_first_transmission() {
        let scheme = example_scheme();
        let trace =
            simulate_delivery(&PopulationInstance::worst_case(vec![6, 2, 1, 1]), &scheme).unwrap();
        let mut dump = Vec::new();
        trace.write_dump(&mut dump).unwrap();
        let dump = String::from_utf8(dump).unwrap();
        let lines: Vec<&str> = dump.lines().collect();
        assert_eq!(lines.len(), 20);
        // Y_{1,3,4} = F^1_{3,4} ⊕ F^7_{1,4} ⊕ F^9_{1,3}; tuple indices 7, 2, 1
        assert_eq!(lines[0], "1,1-3-4,1:1:7;7:7:2;9:9:1");
        // round 2: Y_{3,4,5} = F^8_{4,5}
        assert_eq!(lines[13], "2,3-4-5,8:8:9");
    }
}
