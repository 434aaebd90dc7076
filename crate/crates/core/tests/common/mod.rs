//! Test-side reference implementations, written independently of the
//! library's oracle module.

#![allow(dead_code)]

use std::collections::HashMap;

use biopatch_core::corpus::{KType, Sample, TaskKind};
use biopatch_core::persona::{aux_tables, AuxKind, Person};

pub fn digits(year: i32) -> Vec<u32> {
    year.to_string().chars().map(|c| c.to_digit(10).unwrap()).collect()
}

pub fn yes_no(b: bool) -> String {
    if b { "YES" } else { "NO" }.to_owned()
}

pub fn odd_positions_upper(word: &str) -> String {
    word.chars()
        .enumerate()
        .filter(|(i, _)| (i + 1) % 2 == 1)
        .map(|(_, c)| c.to_ascii_uppercase())
        .collect()
}

pub fn word_ends_upper(text: &str) -> String {
    let mut out = String::new();
    for w in text.split(' ') {
        let cs: Vec<char> = w.chars().collect();
        out.push(cs[0].to_ascii_uppercase());
        out.push(cs[cs.len() - 1].to_ascii_uppercase());
    }
    out
}

pub struct Lookup {
    field: HashMap<String, String>,
    country: HashMap<String, String>,
}

impl Lookup {
    pub fn new() -> Self {
        let mut field = HashMap::new();
        let mut country = HashMap::new();
        for f in aux_tables() {
            match f.kind {
                AuxKind::MajorField => field.insert(f.key, f.value),
                AuxKind::UniversityCountry => country.insert(f.key, f.value),
            };
        }
        Self { field, country }
    }

    /// Expected answer for a QA or reasoning sample, from the persons alone.
    pub fn answer(&self, s: &Sample, persons: &HashMap<u32, &Person>, anniversary: i32) -> String {
        let a = persons[&s.person_ids[0]];
        let b = s.person_ids.get(1).map(|id| persons[id]);
        match (s.ktype, s.task_kind) {
            (KType::B, TaskKind::QA) => a.birth_year.to_string(),
            (KType::D, TaskKind::QA) => a.death_year.to_string(),
            (KType::M, TaskKind::QA) => a.major.clone(),
            (KType::U, TaskKind::QA) => a.university.clone(),
            (KType::B, TaskKind::SR) => yes_no(digits(a.birth_year)[3] % 2 == 1),
            (KType::B, TaskKind::CR) => (a.birth_year - b.unwrap().birth_year).abs().to_string(),
            (KType::B, TaskKind::NR) => digits(a.birth_year).iter().product::<u32>().to_string(),
            (KType::D, TaskKind::SR) => (a.death_year + anniversary).to_string(),
            (KType::D, TaskKind::CR) => {
                let b = b.unwrap();
                assert_ne!(a.death_year, b.death_year, "tied death years in {}", s.id);
                if a.death_year < b.death_year { a.full_name() } else { b.full_name() }
            }
            (KType::D, TaskKind::NR) => digits(a.death_year).iter().sum::<u32>().to_string(),
            (KType::M, TaskKind::SR) => self.field[&a.major].clone(),
            (KType::M, TaskKind::CR) => yes_no(self.field[&a.major] == self.field[&b.unwrap().major]),
            (KType::M, TaskKind::NR) => odd_positions_upper(a.major.split(' ').next().unwrap()),
            (KType::U, TaskKind::SR) => self.country[&a.university].clone(),
            (KType::U, TaskKind::CR) => yes_no(a.university == b.unwrap().university),
            (KType::U, TaskKind::NR) => word_ends_upper(&a.university),
            other => panic!("no reference answer for {other:?}"),
        }
    }

    pub fn field_of(&self, major: &str) -> Option<&str> {
        self.field.get(major).map(String::as_str)
    }

    pub fn country_of(&self, university: &str) -> Option<&str> {
        self.country.get(university).map(String::as_str)
    }
}
