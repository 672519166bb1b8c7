//! Synthetic campus corpus used by the ingestion benchmark, the examples and
//! the CLI demo data.
//!
//! 500 rows over four tables render to exactly 900 documents. The modified
//! variant changes every tenth row of each table, so re-syncing it embeds
//! exactly 90 documents.

use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleTable {
    pub name: &'static str,
    pub columns: Vec<&'static str>,
    pub natural_key: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    /// Documents each row renders to.
    pub docs_per_row: usize,
}

impl SampleTable {
    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("write to Vec");
        for row in &self.rows {
            w.write_record(row).expect("write to Vec");
        }
        w.into_inner().expect("flush to Vec")
    }

    pub fn doc_count(&self) -> usize {
        self.rows.len() * self.docs_per_row
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleCorpus {
    pub tables: Vec<SampleTable>,
}

const FIRST: &[&str] = &[
    "Amina", "Rafiq", "Nusrat", "Tanvir", "Farhana", "Imran", "Sadia", "Kamal", "Lamia", "Arif", "Mehnaz", "Zahid",
    "Tahmina", "Shafin", "Rumana", "Naeem", "Jannat", "Omar", "Priya", "Sabbir",
];
const LAST: &[&str] =
    &["Rahman", "Hossain", "Chowdhury", "Ahmed", "Karim", "Islam", "Sultana", "Haque", "Akter", "Siddiqui"];
const DESIGNATIONS: &[&str] =
    &["Lecturer", "Senior Lecturer", "Assistant Professor", "Associate Professor", "Professor"];
const STATUSES: &[&str] = &["Full-time", "Part-time", "On leave"];
const DAYS: &[&str] = &["Sunday-Tuesday", "Monday-Wednesday", "Saturday-Thursday"];
const TIMES: &[&str] = &["08:00", "09:30", "11:00", "12:30", "14:00", "15:30"];
const TOPICS: &[(&str, &str)] = &[
    ("grading policy", "Grades are assigned on a 4.0 scale and published on the student portal."),
    ("course withdrawal", "A course may be dropped with a W grade before the published deadline."),
    ("thesis registration", "Thesis registration requires 100 completed credits and a supervisor's consent."),
    ("tuition payment", "Tuition is paid in two installments each semester through the bank portal."),
    ("scholarship renewal", "Merit scholarships renew when the term GPA stays at or above 3.5."),
    ("advising appointments", "Advisors hold drop-in hours during the first two weeks of each semester."),
    ("library borrowing", "Students may borrow up to five books for fourteen days."),
    ("exam rescheduling", "Make-up exams are granted for documented medical emergencies only."),
    ("credit transfer", "Transfer credits are evaluated by the department after an application."),
    ("probation rules", "A CGPA below 2.0 places a student on academic probation."),
];
const ASKS: &[&str] = &[
    "What is the {} at the university?",
    "How does the {} work?",
    "Where can I read about the {}?",
    "Who handles the {}?",
    "Is there a deadline for the {}?",
    "What changed recently in the {}?",
    "Can first-year students use the {}?",
    "Which office manages the {}?",
    "How do I appeal a decision on the {}?",
    "Where is the form for the {}?",
];

fn initial(i: usize) -> String {
    let a = b'A' + (i / 26 % 26) as u8;
    let b = b'A' + (i % 26) as u8;
    format!("F{}{}", a as char, b as char)
}

impl SampleCorpus {
    /// The base corpus. Deterministic for a given seed.
    pub fn generate(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let faculty_rows: Vec<Vec<String>> = (0..100)
            .map(|i| {
                let name = format!("{} {}", FIRST[i % FIRST.len()], LAST[(i / FIRST.len() + i) % LAST.len()]);
                vec![
                    initial(i),
                    name,
                    DESIGNATIONS.choose(&mut rng).unwrap().to_string(),
                    STATUSES.choose(&mut rng).unwrap().to_string(),
                    format!("UB-{}{:03}", rng.random_range(2..=9), rng.random_range(1..=60)),
                    format!("{}@campus.example.edu", initial(i).to_lowercase()),
                ]
            })
            .collect();

        let prereq_rows: Vec<Vec<String>> = (0..100)
            .map(|i| {
                let course = 100 + i * 3;
                let pre = course - 1 - rng.random_range(0..3usize).min(course - 100);
                let chain = (0..=rng.random_range(0..4usize))
                    .map(|d| format!("CSE{}", pre.saturating_sub(d * 10).max(100)))
                    .collect::<Vec<_>>()
                    .join("--");
                vec![format!("CSE{course}"), format!("CSE{pre} (HP)"), chain]
            })
            .collect();

        let schedule_rows: Vec<Vec<String>> = (0..200)
            .map(|i| {
                vec![
                    format!("CSE{}", 100 + (i / 2) * 3),
                    format!("{:02}", i % 2 + 1),
                    initial(rng.random_range(0..100)),
                    DAYS.choose(&mut rng).unwrap().to_string(),
                    TIMES.choose(&mut rng).unwrap().to_string(),
                    format!("{}{:02}C", rng.random_range(7..=10), rng.random_range(1..=30)),
                ]
            })
            .collect();

        let qa_rows: Vec<Vec<String>> = (0..100)
            .map(|i| {
                let (topic, answer) = TOPICS[i % TOPICS.len()];
                let ask = ASKS[i / TOPICS.len()];
                vec![ask.replace("{}", topic), answer.to_string()]
            })
            .collect();

        Self {
            tables: vec![
                SampleTable {
                    name: "faculty",
                    columns: vec!["Initial", "Name", "Designation", "Status", "Room", "Email"],
                    natural_key: vec!["Initial"],
                    rows: faculty_rows,
                    docs_per_row: 2,
                },
                SampleTable {
                    name: "prerequisites",
                    columns: vec!["Course", "Pre-Requisite", "Full Chain"],
                    natural_key: vec!["Course"],
                    rows: prereq_rows,
                    docs_per_row: 2,
                },
                SampleTable {
                    name: "schedule",
                    columns: vec!["Course", "Section", "Faculty", "Day", "Time", "Room"],
                    natural_key: vec!["Course", "Section"],
                    rows: schedule_rows,
                    docs_per_row: 2,
                },
                SampleTable {
                    name: "qa",
                    columns: vec!["Question", "Answer"],
                    natural_key: vec!["Question"],
                    rows: qa_rows,
                    docs_per_row: 1,
                },
            ],
        }
    }

    /// A copy with one non-key field changed in every tenth row of each
    /// table (rows 0, 10, 20, ...).
    pub fn modified(&self) -> Self {
        let mut out = self.clone();
        for t in &mut out.tables {
            let key_cols: Vec<usize> =
                t.natural_key.iter().map(|k| t.columns.iter().position(|c| c == k).expect("key column")).collect();
            let target = (0..t.columns.len()).rev().find(|i| !key_cols.contains(i)).expect("a non-key column");
            for row in t.rows.iter_mut().step_by(10) {
                row[target].push_str(" (revised)");
            }
        }
        out
    }

    pub fn row_count(&self) -> usize {
        self.tables.iter().map(|t| t.rows.len()).sum()
    }

    pub fn doc_count(&self) -> usize {
        self.tables.iter().map(SampleTable::doc_count).sum()
    }

    /// Rows that [`SampleCorpus::modified`] changes.
    pub fn modified_row_count(&self) -> usize {
        self.tables.iter().map(|t| t.rows.len().div_ceil(10)).sum()
    }

    /// Documents rendered from the rows that [`SampleCorpus::modified`] changes.
    pub fn modified_doc_count(&self) -> usize {
        self.tables.iter().map(|t| t.rows.len().div_ceil(10) * t.docs_per_row).sum()
    }

    /// Writes one `<table>.csv` per table into `dir`.
    pub fn write_csvs(&self, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        self.tables
            .iter()
            .map(|t| {
                let path = dir.join(format!("{}.csv", t.name));
                std::fs::write(&path, t.to_csv())?;
                Ok(path)
            })
            .collect()
    }
}

/// The ten prerequisite rows of the reference table, as CSV.
pub const PREREQUISITES_TABLE_CSV: &str = include_str!("../../data/prerequisites.csv");
