//! Byte-level execution of a delivery, used to check decodability.
//!
//! Synthetic files are split into `S` equal subpackets, caches are filled
//! from the placement, the server XORs real bytes for every transmission in a
//! trace and each user rebuilds its file from its own cache and the
//! broadcast alone.

use std::collections::HashMap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::delivery::{DeliveryTrace, Scheme};
use crate::error::{Error, Result};
use crate::model::PopulationInstance;
use crate::placement::PlacementMap;

pub const DEFAULT_PAYLOAD_BYTES: usize = 9000;

/// `N` equal-length files, each a whole number of subpackets.
#[derive(Debug, Clone)]
pub struct FileStore {
    files: Vec<Vec<u8>>,
    subpacket_len: usize,
}

impl FileStore {
    pub fn files(&self) -> usize {
        self.files.len()
    }

    pub fn file(&self, index: usize) -> &[u8] {
        &self.files[index]
    }

    pub fn file_len(&self) -> usize {
        self.files.first().map_or(0, Vec::len)
    }

    pub fn subpacket_len(&self) -> usize {
        self.subpacket_len
    }

    pub fn subpacket(&self, file: usize, tuple: usize) -> &[u8] {
        let start = tuple * self.subpacket_len;
        &self.files[file][start..start + self.subpacket_len]
    }
}

/// `files` pseudo-random payloads of `payload_bytes` bytes, zero-padded to a
/// multiple of `subpackets`. File `i` depends only on `(seed, i)`.
pub fn materialize_files(
    files: usize,
    subpackets: usize,
    seed: u64,
    payload_bytes: usize,
) -> Result<FileStore> {
    if subpackets == 0 || payload_bytes < subpackets {
        return Err(Error::PayloadTooSmall {
            payload: payload_bytes,
            subpackets,
        });
    }
    let subpacket_len = payload_bytes.div_ceil(subpackets);
    let padded = subpacket_len * subpackets;
    let files = (0..files)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut bytes = vec![0u8; padded];
            rng.fill_bytes(&mut bytes[..payload_bytes]);
            bytes
        })
        .collect();
    Ok(FileStore {
        files,
        subpacket_len,
    })
}

/// Subpackets held by one physical cache, keyed by `(file, tuple)`.
#[derive(Debug, Clone)]
pub struct CacheContent {
    cache: usize,
    subpackets: HashMap<(usize, usize), Vec<u8>>,
}

impl CacheContent {
    pub fn fill(store: &FileStore, placement: &PlacementMap, cache: usize) -> Self {
        let mut subpackets = HashMap::new();
        for file in 0..store.files() {
            for &tuple in placement.stored_at(cache) {
                subpackets.insert((file, tuple), store.subpacket(file, tuple).to_vec());
            }
        }
        CacheContent { cache, subpackets }
    }

    pub fn cache(&self) -> usize {
        self.cache
    }

    pub fn get(&self, file: usize, tuple: usize) -> Option<&[u8]> {
        self.subpackets.get(&(file, tuple)).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.subpackets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subpackets.is_empty()
    }
}

/// XOR payload of every transmission, in trace order.
#[derive(Debug, Clone)]
pub struct Broadcast {
    payloads: Vec<Vec<u8>>,
}

impl Broadcast {
    pub fn payloads(&self) -> &[Vec<u8>] {
        &self.payloads
    }
}

/// Server side: computes the bytes of every transmission.
pub fn encode_trace(trace: &DeliveryTrace, store: &FileStore) -> Broadcast {
    let payloads = trace
        .transmissions()
        .map(|tx| {
            let mut payload = vec![0u8; store.subpacket_len()];
            for term in &tx.terms {
                xor_into(&mut payload, store.subpacket(term.file, term.subpacket));
            }
            payload
        })
        .collect();
    Broadcast { payloads }
}

fn xor_into(acc: &mut [u8], other: &[u8]) {
    for (a, b) in acc.iter_mut().zip(other) {
        *a ^= b;
    }
}

/// Rebuilds `request` for `user` from its cache and the broadcast only.
///
/// `subpackets` is the number of subpackets per file.
pub fn decode_user(
    user: usize,
    trace: &DeliveryTrace,
    broadcast: &Broadcast,
    cache: &CacheContent,
    request: usize,
    subpackets: usize,
) -> Result<Vec<u8>> {
    let mut recovered: Vec<Option<Vec<u8>>> = (0..subpackets)
        .map(|tuple| cache.get(request, tuple).map(<[u8]>::to_vec))
        .collect();

    for (tx, payload) in trace.transmissions().zip(broadcast.payloads()) {
        let Some(mine) = tx.terms.iter().find(|t| t.user == user) else {
            continue;
        };
        let mut piece = payload.clone();
        for other in tx.terms.iter().filter(|t| t.user != user) {
            let side =
                cache
                    .get(other.file, other.subpacket)
                    .ok_or(Error::MissingSideInformation {
                        user: user + 1,
                        file: other.file + 1,
                        tuple: other.subpacket + 1,
                    })?;
            xor_into(&mut piece, side);
        }
        recovered[mine.subpacket] = Some(piece);
    }

    let missing = recovered.iter().filter(|p| p.is_none()).count();
    if missing > 0 {
        return Err(Error::IncompleteDelivery {
            user: user + 1,
            missing,
        });
    }
    Ok(recovered.into_iter().flatten().flatten().collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UserOutcome {
    Decoded,
    /// Decoding succeeded but the bytes differ from the requested file.
    Corrupted,
    Failed(String),
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub outcomes: Vec<UserOutcome>,
}

impl VerifyReport {
    pub fn all_decoded(&self) -> bool {
        self.outcomes.iter().all(|o| *o == UserOutcome::Decoded)
    }

    pub fn failures(&self) -> usize {
        self.outcomes
            .iter()
            .filter(|o| **o != UserOutcome::Decoded)
            .count()
    }
}

/// Materializes files, runs the delivery for `instance` and decodes every
/// user against its requested file.
pub fn verify_instance(
    instance: &PopulationInstance,
    scheme: &Scheme,
    seed: u64,
    payload_bytes: usize,
) -> Result<VerifyReport> {
    let placement = scheme.placement();
    let subpackets = placement.subpacketization();
    let store = materialize_files(placement.files() as usize, subpackets, seed, payload_bytes)?;
    let trace = crate::delivery::simulate_delivery(instance, scheme)?;
    let broadcast = encode_trace(&trace, &store);

    let mut caches: Vec<Option<CacheContent>> = vec![None; placement.caches()];
    let mut outcomes = Vec::with_capacity(instance.users());
    for (cache, users) in instance.users_by_cache().into_iter().enumerate() {
        for user in users {
            let content =
                caches[cache].get_or_insert_with(|| CacheContent::fill(&store, placement, cache));
            let request = instance.demands()[user];
            let outcome = match decode_user(user, &trace, &broadcast, content, request, subpackets)
            {
                Ok(bytes) if bytes == store.file(request) => UserOutcome::Decoded,
                Ok(_) => UserOutcome::Corrupted,
                Err(e) => UserOutcome::Failed(e.to_string()),
            };
            outcomes.push(outcome);
        }
    }
    Ok(VerifyReport { outcomes })
}
