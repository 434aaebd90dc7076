//! Exact answer oracles for the reasoning tasks.

use std::fmt;

use crate::error::{Error, Result};
use crate::persona::{aux_lookup, AuxKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum YesNo {
    Yes,
    No,
}

impl YesNo {
    pub fn from_bool(b: bool) -> Self {
        if b {
            YesNo::Yes
        } else {
            YesNo::No
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            YesNo::Yes => "YES",
            YesNo::No => "NO",
        }
    }
}

impl fmt::Display for YesNo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub(crate) fn year_digits(year: i32) -> Result<[u32; 4]> {
    if !(1000..=9999).contains(&year) {
        return Err(Error::Domain(format!("{year} is not a four-digit year")));
    }
    let y = year as u32;
    Ok([y / 1000, y / 100 % 10, y / 10 % 10, y % 10])
}

/// Product of the four digits of a year.
pub fn mscore(year: i32) -> Result<u32> {
    Ok(year_digits(year)?.iter().product())
}

/// Sum of the four digits of a year.
pub fn ascore(year: i32) -> Result<u32> {
    Ok(year_digits(year)?.iter().sum())
}

/// YES when the year is odd.
pub fn parity(year: i32) -> Result<YesNo> {
    year_digits(year)?;
    Ok(YesNo::from_bool(year % 2 == 1))
}

pub fn anniversary(death_year: i32, n: i32) -> Result<i32> {
    year_digits(death_year)?;
    Ok(death_year + n)
}

pub fn year_diff(a: i32, b: i32) -> Result<i32> {
    year_digits(a)?;
    year_digits(b)?;
    Ok((a - b).abs())
}

/// Name of whoever died earlier. Equal years have no answer.
pub fn died_first<'a>(a: (&'a str, i32), b: (&'a str, i32)) -> Result<&'a str> {
    year_digits(a.1)?;
    year_digits(b.1)?;
    match a.1.cmp(&b.1) {
        std::cmp::Ordering::Less => Ok(a.0),
        std::cmp::Ordering::Greater => Ok(b.0),
        std::cmp::Ordering::Equal => Err(Error::Domain(format!(
            "{} and {} died in the same year",
            a.0, b.0
        ))),
    }
}

pub fn field_of(major: &str) -> Result<&'static str> {
    aux_lookup(AuxKind::MajorField, major)
        .ok_or_else(|| Error::Domain(format!("unknown major `{major}`")))
}

pub fn same_field(a: &str, b: &str) -> Result<YesNo> {
    Ok(YesNo::from_bool(field_of(a)? == field_of(b)?))
}

pub fn country_of(university: &str) -> Result<&'static str> {
    aux_lookup(AuxKind::UniversityCountry, university)
        .ok_or_else(|| Error::Domain(format!("unknown university `{university}`")))
}

/// YES when both persons graduated from the same university.
pub fn alumni(a: &str, b: &str) -> Result<YesNo> {
    country_of(a)?;
    country_of(b)?;
    Ok(YesNo::from_bool(a == b))
}

pub(crate) fn checked_words(text: &str) -> Result<Vec<&str>> {
    let words: Vec<&str> = text.split_whitespace().collect();
    if words.is_empty() {
        return Err(Error::Domain("empty word".into()));
    }
    if let Some(bad) = words.iter().find(|w| !w.chars().all(char::is_alphabetic)) {
        return Err(Error::Domain(format!("`{bad}` is not alphabetic")));
    }
    Ok(words)
}

fn upper(c: char) -> String {
    c.to_uppercase().collect()
}

/// Uppercased letters at odd 1-indexed positions of the first word.
pub fn odd_letters(text: &str) -> Result<String> {
    let first = checked_words(text)?[0];
    Ok(first.chars().step_by(2).map(upper).collect())
}

/// First and last letter of every word, uppercased and concatenated.
pub fn first_last(text: &str) -> Result<String> {
    let words = checked_words(text)?;
    Ok(words
        .iter()
        .map(|w| {
            let first = w.chars().next().unwrap();
            let last = w.chars().next_back().unwrap();
            upper(first) + &upper(last)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_examples() {
        assert_eq!(mscore(1974).unwrap(), 252);
        assert_eq!(ascore(2017).unwrap(), 10);
        assert_eq!(parity(1974).unwrap(), YesNo::No);
        assert_eq!(parity(1975).unwrap(), YesNo::Yes);
        assert_eq!(anniversary(2017, 10).unwrap(), 2027);
        assert_eq!(year_diff(1974, 1858).unwrap(), 116);
        assert_eq!(year_diff(1858, 1974).unwrap(), 116);
        assert_eq!(died_first(("Darreus Hsiao", 2017), ("Aydn Cheung", 1919)).unwrap(), "Aydn Cheung");
        assert_eq!(field_of("Dentistry").unwrap(), "Medicine");
        assert_eq!(same_field("Dentistry", "Nursing").unwrap(), YesNo::Yes);
        assert_eq!(same_field("Dentistry", "Music").unwrap(), YesNo::No);
        assert_eq!(country_of("Zhejiang University").unwrap(), "China");
        assert_eq!(alumni("Zhejiang University", "Kyoto University").unwrap(), YesNo::No);
        assert_eq!(alumni("Kyoto University", "Kyoto University").unwrap(), YesNo::Yes);
        assert_eq!(odd_letters("Dentistry").unwrap(), "DNITY");
        assert_eq!(first_last("Zhejiang University").unwrap(), "ZGUY");
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(mscore(1000).unwrap(), 0);
        assert_eq!(odd_letters("A").unwrap(), "A");
        assert_eq!(first_last("A").unwrap(), "AA");
        assert_eq!(odd_letters("Computer Science").unwrap(), "CMUE");
        assert_eq!(first_last("University of Tübingen").unwrap(), "UYOFTN");
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(mscore(999), Err(Error::Domain(_))));
        assert!(matches!(ascore(10000), Err(Error::Domain(_))));
        assert!(matches!(odd_letters(""), Err(Error::Domain(_))));
        assert!(matches!(odd_letters("   "), Err(Error::Domain(_))));
        assert!(matches!(first_last("R2D2 unit"), Err(Error::Domain(_))));
        assert!(matches!(died_first(("a", 1900), ("b", 1900)), Err(Error::Domain(_))));
        assert!(matches!(field_of("Alchemy"), Err(Error::Domain(_))));
    }
}
