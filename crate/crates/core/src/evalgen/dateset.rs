//! Template-generated temporal questions whose answers depend on the current
//! date.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::date::{Date, Weekday};

pub const CURRENT_DATES: usize = 500;
/// Years within which the paired past and future dates fall.
pub const RANGE_YEARS: i64 = 4;
pub const FIRST_YEAR: i32 = 2010;
pub const LAST_YEAR: i32 = 2025;

/// (family, size) for the seven template rows.
pub const DATESET_SIZES: [(&str, usize); 7] = [
    ("days_between", 400),
    ("attribute_ago", 800),
    ("attribute_in_days", 800),
    ("weekday_of_date", 400),
    ("attribute_relative_day", 4_000),
    ("holiday_attribute", 1_800),
    ("holiday_distance", 1_200),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatesetItem {
    pub question: String,
    pub gold: String,
    pub current_date: Date,
    pub template_family: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Attribute {
    Weekday,
    DayOfMonth,
    Month,
    Year,
}

impl Attribute {
    pub const ALL: [Attribute; 4] = [
        Attribute::Weekday,
        Attribute::DayOfMonth,
        Attribute::Month,
        Attribute::Year,
    ];

    pub fn phrase(self) -> &'static str {
        match self {
            Attribute::Weekday => "day of the week",
            Attribute::DayOfMonth => "day of the month",
            Attribute::Month => "month",
            Attribute::Year => "year",
        }
    }

    pub fn of(self, d: Date) -> String {
        match self {
            Attribute::Weekday => d.weekday().name().into(),
            Attribute::DayOfMonth => d.day().to_string(),
            Attribute::Month => d.month_name().into(),
            Attribute::Year => d.year().to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Days,
    Weeks,
    Months,
    Years,
}

impl Unit {
    pub const ALL: [Unit; 4] = [Unit::Days, Unit::Weeks, Unit::Months, Unit::Years];

    pub fn name(self, n: i64) -> &'static str {
        match (self, n == 1) {
            (Unit::Days, true) => "day",
            (Unit::Days, false) => "days",
            (Unit::Weeks, true) => "week",
            (Unit::Weeks, false) => "weeks",
            (Unit::Months, true) => "month",
            (Unit::Months, false) => "months",
            (Unit::Years, true) => "year",
            (Unit::Years, false) => "years",
        }
    }

    pub fn plural(self) -> &'static str {
        self.name(2)
    }

    /// Whole units from `earlier` to `later`.
    pub fn between(self, earlier: Date, later: Date) -> i64 {
        match self {
            Unit::Days => earlier.days_until(later),
            Unit::Weeks => earlier.days_until(later).div_euclid(7),
            Unit::Months => earlier.whole_months_until(later),
            Unit::Years => earlier.whole_months_until(later).div_euclid(12),
        }
    }

    pub fn shift(self, d: Date, n: i64) -> Date {
        match self {
            Unit::Days => d.add_days(n),
            Unit::Weeks => d.add_days(7 * n),
            Unit::Months => d.add_months(n),
            Unit::Years => d.add_years(n),
        }
    }
}

/// The eleven US federal holidays, on their nominal dates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Holiday {
    NewYearsDay,
    MartinLutherKingJrDay,
    WashingtonsBirthday,
    MemorialDay,
    Juneteenth,
    IndependenceDay,
    LaborDay,
    ColumbusDay,
    VeteransDay,
    Thanksgiving,
    Christmas,
}

impl Holiday {
    pub const ALL: [Holiday; 11] = [
        Holiday::NewYearsDay,
        Holiday::MartinLutherKingJrDay,
        Holiday::WashingtonsBirthday,
        Holiday::MemorialDay,
        Holiday::Juneteenth,
        Holiday::IndependenceDay,
        Holiday::LaborDay,
        Holiday::ColumbusDay,
        Holiday::VeteransDay,
        Holiday::Thanksgiving,
        Holiday::Christmas,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Holiday::NewYearsDay => "New Year's Day",
            Holiday::MartinLutherKingJrDay => "Martin Luther King Jr. Day",
            Holiday::WashingtonsBirthday => "Washington's Birthday",
            Holiday::MemorialDay => "Memorial Day",
            Holiday::Juneteenth => "Juneteenth",
            Holiday::IndependenceDay => "Independence Day",
            Holiday::LaborDay => "Labor Day",
            Holiday::ColumbusDay => "Columbus Day",
            Holiday::VeteransDay => "Veterans Day",
            Holiday::Thanksgiving => "Thanksgiving",
            Holiday::Christmas => "Christmas Day",
        }
    }

    pub fn date(self, year: i32) -> Date {
        let fixed = |m, d| Date::new(year, m, d).expect("fixed holiday");
        match self {
            Holiday::NewYearsDay => fixed(1, 1),
            Holiday::MartinLutherKingJrDay => nth_weekday(year, 1, Weekday::Monday, 3),
            Holiday::WashingtonsBirthday => nth_weekday(year, 2, Weekday::Monday, 3),
            Holiday::MemorialDay => last_weekday(year, 5, Weekday::Monday),
            Holiday::Juneteenth => fixed(6, 19),
            Holiday::IndependenceDay => fixed(7, 4),
            Holiday::LaborDay => nth_weekday(year, 9, Weekday::Monday, 1),
            Holiday::ColumbusDay => nth_weekday(year, 10, Weekday::Monday, 2),
            Holiday::VeteransDay => fixed(11, 11),
            Holiday::Thanksgiving => nth_weekday(year, 11, Weekday::Thursday, 4),
            Holiday::Christmas => fixed(12, 25),
        }
    }
}

/// The `n`-th (1-based) given weekday of a month.
pub fn nth_weekday(year: i32, month: u32, wd: Weekday, n: u32) -> Date {
    let first = Date::new(year, month, 1).expect("valid month");
    let offset = (wd.index() + 7 - first.weekday().index()) % 7;
    first.add_days((offset + 7 * (n - 1)) as i64)
}

pub fn last_weekday(year: i32, month: u32, wd: Weekday) -> Date {
    let last = Date::new(year, month, crate::date::days_in_month(year, month)).expect("valid month");
    let back = (last.weekday().index() + 7 - wd.index()) % 7;
    last.add_days(-(back as i64))
}

const RELATIVE_DAYS: [(&str, i64); 5] = [
    ("the day before yesterday", -2),
    ("yesterday", -1),
    ("today", 0),
    ("tomorrow", 1),
    ("the day after tomorrow", 2),
];

#[derive(Debug, Clone, Copy)]
struct Anchor {
    current: Date,
    past: Date,
    future: Date,
}

fn draw_anchors(rng: &mut ChaCha8Rng) -> Vec<Anchor> {
    let lo = Date::new(FIRST_YEAR, 1, 1).expect("valid").to_days();
    let hi = Date::new(LAST_YEAR, 12, 31).expect("valid").to_days();
    let mut seen = alloc::collections::BTreeSet::new();
    let mut out = Vec::with_capacity(CURRENT_DATES);
    while out.len() < CURRENT_DATES {
        let current = Date::from_days(rng.random_range(lo..=hi));
        if !seen.insert(current) {
            continue;
        }
        let back = current.days_until(current.add_years(-RANGE_YEARS)).abs();
        let fwd = current.days_until(current.add_years(RANGE_YEARS));
        let past = current.add_days(-rng.random_range(1..=back));
        let future = current.add_days(rng.random_range(1..=fwd));
        out.push(Anchor { current, past, future });
    }
    out
}

fn item(family: &str, current: Date, question: String, gold: String) -> DatesetItem {
    DatesetItem {
        question,
        gold,
        current_date: current,
        template_family: family.into(),
    }
}

/// Shuffles every (anchor, variant) combination and keeps the first `size`.
fn pick<V: Copy>(rng: &mut ChaCha8Rng, anchors: usize, variants: &[V], size: usize) -> Vec<(usize, V)> {
    let mut all: Vec<(usize, V)> = (0..anchors)
        .flat_map(|a| variants.iter().map(move |&v| (a, v)))
        .collect();
    all.shuffle(rng);
    all.truncate(size);
    all
}

/// Deterministic per seed: 9,400 items over seven template rows.
pub fn generate_dateset(seed: u64) -> Vec<DatesetItem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let anchors = draw_anchors(&mut rng);
    let n = anchors.len();
    let mut out = Vec::with_capacity(9_400);

    let (fam, size) = DATESET_SIZES[0];
    for (a, ago) in pick(&mut rng, n, &[true, false], size) {
        let an = anchors[a];
        let (q, g) = if ago {
            (
                format!("How many days ago was {}?", an.past.long_form()),
                an.past.days_until(an.current),
            )
        } else {
            (
                format!("How many days are there until {}?", an.future.long_form()),
                an.current.days_until(an.future),
            )
        };
        out.push(item(fam, an.current, q, g.to_string()));
    }

    let (fam, size) = DATESET_SIZES[1];
    let combos: Vec<(Attribute, Unit)> = Attribute::ALL
        .iter()
        .flat_map(|&a| Unit::ALL.iter().map(move |&u| (a, u)))
        .collect();
    for (a, (attr, unit)) in pick(&mut rng, n, &combos, size) {
        let an = anchors[a];
        let delta = unit.between(an.past, an.current).max(1);
        let target = unit.shift(an.current, -delta);
        let q = format!("What {} was it {} {} ago?", attr.phrase(), delta, unit.name(delta));
        out.push(item(fam, an.current, q, attr.of(target)));
    }

    let (fam, size) = DATESET_SIZES[2];
    for (a, attr) in pick(&mut rng, n, &Attribute::ALL, size) {
        let an = anchors[a];
        let delta = an.current.days_until(an.future);
        let q = format!("What {} will it be in {} {}?", attr.phrase(), delta, Unit::Days.name(delta));
        out.push(item(fam, an.current, q, attr.of(an.future)));
    }

    let (fam, size) = DATESET_SIZES[3];
    for (a, past) in pick(&mut rng, n, &[true, false], size) {
        let an = anchors[a];
        let (verb, d) = if past { ("was", an.past) } else { ("is", an.future) };
        let q = format!("What day of the week {} it on {}?", verb, d.long_form());
        out.push(item(fam, an.current, q, d.weekday().name().into()));
    }

    let (fam, size) = DATESET_SIZES[4];
    let combos: Vec<(Attribute, usize)> = Attribute::ALL
        .iter()
        .flat_map(|&a| (0..RELATIVE_DAYS.len()).map(move |r| (a, r)))
        .collect();
    for (a, (attr, r)) in pick(&mut rng, n, &combos, size) {
        let an = anchors[a];
        let (phrase, off) = RELATIVE_DAYS[r];
        let verb = if off < 0 { "was" } else { "is" };
        let q = format!("What {} {} it {}?", attr.phrase(), verb, phrase);
        out.push(item(fam, an.current, q, attr.of(an.current.add_days(off))));
    }

    let (fam, size) = DATESET_SIZES[5];
    let combos: Vec<(Attribute, Holiday)> = Attribute::ALL[..3]
        .iter()
        .flat_map(|&a| Holiday::ALL.iter().map(move |&h| (a, h)))
        .collect();
    for (a, (attr, h)) in pick(&mut rng, n, &combos, size) {
        let an = anchors[a];
        let d = h.date(an.current.year());
        let verb = if d < an.current { "was" } else { "is" };
        let q = format!("What {} {} {} this year?", attr.phrase(), verb, h.name());
        out.push(item(fam, an.current, q, attr.of(d)));
    }

    let (fam, size) = DATESET_SIZES[6];
    let combos: Vec<(Unit, Holiday)> = Unit::ALL
        .iter()
        .flat_map(|&u| Holiday::ALL.iter().map(move |&h| (u, h)))
        .collect();
    for (a, (unit, h)) in pick(&mut rng, n, &combos, size) {
        let an = anchors[a];
        let d = h.date(an.current.year());
        let (q, g) = if d < an.current {
            (
                format!("How many {} ago was {} this year?", unit.plural(), h.name()),
                unit.between(d, an.current),
            )
        } else {
            (
                format!("How many {} are there until {} this year?", unit.plural(), h.name()),
                unit.between(an.current, d),
            )
        };
        out.push(item(fam, an.current, q, g.to_string()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn holiday_rules() {
        assert_eq!(Holiday::Thanksgiving.date(2020), Date::new(2020, 11, 26).unwrap());
        assert_eq!(Holiday::MemorialDay.date(2021), Date::new(2021, 5, 31).unwrap());
        assert_eq!(Holiday::LaborDay.date(2019), Date::new(2019, 9, 2).unwrap());
        assert_eq!(Holiday::MartinLutherKingJrDay.date(2023), Date::new(2023, 1, 16).unwrap());
    }

    #[test]
    fn sizes_and_determinism() {
        let a = generate_dateset(11);
        assert_eq!(a.len(), 9_400);
        for (fam, size) in DATESET_SIZES {
            assert_eq!(a.iter().filter(|i| i.template_family == fam).count(), size);
        }
        assert_eq!(a, generate_dateset(11));
        assert_ne!(a, generate_dateset(12));
    }

    #[test]
    fn days_ago_example() {
        let cur = Date::new(2020, 11, 20).unwrap();
        let past = Date::new(2020, 8, 14).unwrap();
        assert_eq!(Unit::Days.between(past, cur), 98);
    }
}
