//! Oracles and fixtures shared by the integration tests. The oracles are
//! written from first principles and do not call into the library's
//! metric code.
#![allow(dead_code)]

use std::collections::BTreeMap;

use perspectra::corpus::{AnnotationMatrix, DatasetBundle, Instance, Label, Split};

pub type Rows = Vec<Vec<Option<Label>>>;

pub fn matrix_from_rows(rows: &Rows) -> AnnotationMatrix {
    let annotators = (0..rows.len()).map(|a| format!("a{a}")).collect();
    let n = rows.first().map_or(0, |r| r.len());
    let instances = (0..n).map(|i| format!("i{i}")).collect();
    let mut m = AnnotationMatrix::new(annotators, instances).unwrap();
    for (a, row) in rows.iter().enumerate() {
        for (i, cell) in row.iter().enumerate() {
            if let Some(l) = cell {
                m.set(&format!("a{a}"), &format!("i{i}"), *l).unwrap();
            }
        }
    }
    m
}

pub fn bundle_from_rows(rows: &Rows) -> DatasetBundle {
    let m = matrix_from_rows(rows);
    let instances = m.instance_ids().iter().map(|id| Instance::new(id.clone(), format!("text of {id}"))).collect();
    DatasetBundle::human(instances, m).unwrap()
}

/// Krippendorff's nominal alpha by brute force: collect every pairable
/// value, enumerate all ordered within-unit pairs weighted 1/(m_u - 1) for
/// the observed disagreement, and all ordered pairs of distinct pairable
/// values for the expected disagreement. `None` when undefined.
pub fn brute_force_alpha(rows: &Rows) -> Option<f64> {
    let n_units = rows.first().map_or(0, |r| r.len());
    let mut units: Vec<Vec<Label>> = Vec::new();
    for i in 0..n_units {
        let values: Vec<Label> = rows.iter().filter_map(|r| r[i]).collect();
        if values.len() >= 2 {
            units.push(values);
        }
    }
    let pool: Vec<Label> = units.iter().flatten().copied().collect();
    let n = pool.len();
    if n < 2 {
        return None;
    }
    let mut d_o = 0.0;
    for unit in &units {
        let m = unit.len() as f64;
        for (x, a) in unit.iter().enumerate() {
            for (y, b) in unit.iter().enumerate() {
                if x != y && a != b {
                    d_o += 1.0 / (m - 1.0);
                }
            }
        }
    }
    d_o /= n as f64;
    let mut d_e = 0.0;
    for (x, a) in pool.iter().enumerate() {
        for (y, b) in pool.iter().enumerate() {
            if x != y && a != b {
                d_e += 1.0;
            }
        }
    }
    d_e /= (n * (n - 1)) as f64;
    if d_e == 0.0 {
        return None;
    }
    Some(1.0 - d_o / d_e)
}

pub const MARKER: &str = "####Annotator:";

/// Hand-written regex reading of the response contract: the last
/// `marker\s*([01])` not followed by another digit, else a bare trimmed
/// digit when no marker occurs at all.
pub fn regex_oracle(raw: &str, marker: &str) -> Option<Label> {
    let re = regex::Regex::new(&format!(r"{}\s*([01])(?:[^0-9]|$)", regex::escape(marker))).unwrap();
    if let Some(c) = re.captures_iter(raw).last() {
        return Some(c[1].parse().unwrap());
    }
    if raw.contains(marker) {
        return None;
    }
    match raw.trim() {
        "0" => Some(0),
        "1" => Some(1),
        _ => None,
    }
}

/// 50 well-formed responses with their labels.
pub const WELL_FORMED: [(&str, Label); 50] = [
    ("####Annotator:1", 1),
    ("####Annotator:0", 0),
    ("####Annotator: 1", 1),
    ("####Annotator: 0", 0),
    ("####Annotator:  1", 1),
    ("####Annotator:\t0", 0),
    ("####Annotator:\n1", 1),
    ("  ####Annotator:0  ", 0),
    ("\n\n####Annotator:1\n", 1),
    ("Sure! ####Annotator: 0", 0),
    ("Sure! ####Annotator:1", 1),
    ("Here is my annotation: ####Annotator:1", 1),
    ("Here is my annotation:\n####Annotator:0", 0),
    ("As requested. ####Annotator:1.", 1),
    ("####Annotator:0.", 0),
    ("####Annotator:1 because the tweet is hostile.", 1),
    ("####Annotator:0 since it is a neutral opinion.", 0),
    ("After reading it carefully, ####Annotator: 1 (hateful)", 1),
    ("My answer is ####Annotator:0, not hateful.", 0),
    ("####Annotator:1\nExplanation: it targets a group.", 1),
    ("####Annotator:0\n\nNo hate detected.", 0),
    ("Okay.\n####Annotator:1\nLet me know if you need more.", 1),
    ("Okay.\n####Annotator:0\nLet me know if you need more.", 0),
    ("The statement is offensive. ####Annotator:1", 1),
    ("The statement is harmless. ####Annotator:0", 0),
    ("####Annotator:0 ... on reflection ####Annotator:1", 1),
    ("####Annotator:1 ... actually, ####Annotator:0", 0),
    ("First thought ####Annotator:1 final ####Annotator: 1", 1),
    ("Draft: ####Annotator:0\nFinal: ####Annotator:0", 0),
    ("####Annotator:1!", 1),
    ("####Annotator:0!", 0),
    ("####Annotator:1)", 1),
    ("(####Annotator:0)", 0),
    ("\"####Annotator:1\"", 1),
    ("'####Annotator:0'", 0),
    ("Response -> ####Annotator:1 <- done", 1),
    ("####Annotator: 0 - not hate", 0),
    ("####Annotator:1, definitely.", 1),
    ("I would say ####Annotator:   0", 0),
    ("As a Muslim migrant I find this hateful. ####Annotator:1", 1),
    ("As a native English woman I do not. ####Annotator:0", 0),
    ("1", 1),
    ("0", 0),
    (" 1 ", 1),
    ("\n0\n", 0),
    ("\t1", 1),
    ("0\r\n", 0),
    ("####Annotator:1 ####Annotator: maybe", 1),
    ("####Annotator: 0 and ####Annotator: unsure", 0),
    ("Label follows.\r\n####Annotator:\r\n1", 1),
];

/// 20 responses that must not yield a label.
pub const GARBAGE: [&str; 20] = [
    "I cannot annotate this.",
    "I'm sorry, but I can't help with that request.",
    "",
    "   ",
    "####Annotator:",
    "####Annotator: yes",
    "####Annotator: no",
    "####Annotator:2",
    "####Annotator:10",
    "####Annotator:01",
    "####Annotator: -1",
    "10",
    "label: 1",
    "The answer is 0",
    "Annotator: 1",
    "### Annotator:1",
    "####annotator:1",
    "yes",
    "It depends on the context.",
    "0 or 1",
];

/// Analytic Beta(2, 5) density.
pub fn beta25(x: f64) -> f64 {
    if !(0.0..=1.0).contains(&x) {
        return 0.0;
    }
    30.0 * x * (1.0 - x).powi(4)
}

pub fn split_of(bundle: &DatasetBundle) -> BTreeMap<String, Split> {
    bundle.splits().clone()
}
