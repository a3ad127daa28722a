#![allow(dead_code)]

pub mod gradcheck;
pub mod oracles;

use std::fmt::Write;
use std::path::Path;

use privrec::data::{Dataset, OCCUPATIONS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// u.data and u.user text for a small population where gender decides which
/// half of the catalogue a user mostly rates.
pub fn synthetic_files(users: usize, items: usize, seed: u64) -> (String, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut ratings, mut profiles) = (String::new(), String::new());
    let half = items / 2;
    for u in 1..=users {
        let female = rng.random_bool(0.4);
        let age = rng.random_range(15..70);
        let occupation = OCCUPATIONS[rng.random_range(0..OCCUPATIONS.len())];
        writeln!(
            profiles,
            "{u}|{age}|{}|{occupation}|00000",
            if female { "F" } else { "M" }
        )
        .unwrap();
        let n = rng.random_range(8..16);
        let mut seen = Vec::new();
        while seen.len() < n {
            let own = rng.random_bool(0.85);
            let v = if own == female {
                rng.random_range(0..half)
            } else {
                rng.random_range(half..items)
            };
            if !seen.contains(&v) {
                seen.push(v);
            }
        }
        for (t, v) in seen.into_iter().enumerate() {
            let r = rng.random_range(1..=5);
            writeln!(ratings, "{u}\t{}\t{r}\t{}", v + 1, 880_000_000 + t).unwrap();
        }
    }
    (ratings, profiles)
}

pub fn synthetic_dataset(users: usize, items: usize, seed: u64) -> Dataset {
    let (r, u) = synthetic_files(users, items, seed);
    Dataset::from_strs(&r, &u).unwrap()
}

pub fn write_synthetic(dir: &Path, users: usize, items: usize, seed: u64) {
    let (r, u) = synthetic_files(users, items, seed);
    std::fs::write(dir.join("u.data"), r).unwrap();
    std::fs::write(dir.join("u.user"), u).unwrap();
}
