//! Running an instrumented program over a test suite and collecting, per
//! test, the last value of every site and the parent values seen at that
//! moment.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::gsa::{InstrumentedProgram, SiteTable};
use crate::lang::{execute, ExecError, ExecOptions, ExecStatus, ExecutionResult, RecordHook, SiteId, Value, DEFAULT_STEP_LIMIT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    pub id: String,
    pub args: Vec<Value>,
    /// Without an expected output a test passes iff it completes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_stdout: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Oracle<'a> {
    ExpectOutput(&'a str),
    ExpectCompletion,
}

impl TestCase {
    pub fn oracle(&self) -> Oracle<'_> {
        match &self.expected_stdout {
            Some(s) => Oracle::ExpectOutput(s),
            None => Oracle::ExpectCompletion,
        }
    }

    /// True when the run violates this test's oracle.
    pub fn fails(&self, result: &ExecutionResult) -> bool {
        let completed = result.status == ExecStatus::Completed;
        match self.oracle() {
            Oracle::ExpectOutput(s) => !completed || result.stdout != s,
            Oracle::ExpectCompletion => !completed,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TestSuite {
    pub tests: Vec<TestCase>,
}

impl TestSuite {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("suite serializes")
    }
}

/// One test's profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub test_id: String,
    /// 1 if the test failed.
    pub y: u8,
    /// Last value of every site; `Na` when it never ran or its last
    /// assignment was skipped.
    pub sites: BTreeMap<SiteId, Value>,
    /// Parent values captured alongside the last value of each executed site.
    pub covs: BTreeMap<SiteId, BTreeMap<SiteId, Value>>,
}

impl ProfileRow {
    pub fn value(&self, site: SiteId) -> &Value {
        self.sites.get(&site).unwrap_or(&Value::Na)
    }

    pub fn executed(&self, site: SiteId) -> bool {
        !self.value(site).is_na()
    }

    /// Value of `parent` captured when `site` last ran.
    pub fn covariate(&self, site: SiteId, parent: SiteId) -> &Value {
        self.covs
            .get(&site)
            .and_then(|m| m.get(&parent))
            .unwrap_or(&Value::Na)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProfileMatrix {
    pub rows: Vec<ProfileRow>,
}

#[derive(Debug, thiserror::Error)]
pub enum ProfileError {
    #[error("test `{test}`: {source}")]
    Exec { test: String, source: ExecError },
    #[error("profile line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ProfileMatrix {
    pub fn n_failing(&self) -> usize {
        self.rows.iter().filter(|r| r.y == 1).count()
    }

    pub fn n_passing(&self) -> usize {
        self.rows.len() - self.n_failing()
    }

    pub fn write_jsonl(&self, mut w: impl Write) -> std::io::Result<()> {
        for r in &self.rows {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }

    pub fn read_jsonl(r: impl BufRead) -> Result<Self, ProfileError> {
        let mut rows = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row = serde_json::from_str(&line).map_err(|source| ProfileError::Json { line: i + 1, source })?;
            rows.push(row);
        }
        Ok(ProfileMatrix { rows })
    }
}

/// Collects the last-value profile of one run.
#[derive(Default)]
pub struct ProfileHook {
    sites: BTreeMap<SiteId, Value>,
    covs: BTreeMap<SiteId, BTreeMap<SiteId, Value>>,
}

impl RecordHook for ProfileHook {
    fn record(&mut self, site: SiteId, value: &Value, covariates: &[(SiteId, Value)]) {
        self.sites.insert(site, value.clone());
        self.covs.insert(site, covariates.iter().cloned().collect());
    }

    fn skip(&mut self, site: SiteId) {
        self.sites.insert(site, Value::Na);
        self.covs.remove(&site);
    }
}

impl ProfileHook {
    fn into_row(self, table: &SiteTable, test_id: String, y: u8) -> ProfileRow {
        let mut sites = self.sites;
        for s in table.iter() {
            sites.entry(s.id).or_insert(Value::Na);
        }
        ProfileRow {
            test_id,
            y,
            sites,
            covs: self.covs,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RunConfig {
    pub step_limit: u64,
    pub forced_flip: Option<SiteId>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            step_limit: DEFAULT_STEP_LIMIT,
            forced_flip: None,
        }
    }
}

/// Runs one test with recording enabled.
pub fn run_test(
    program: &InstrumentedProgram,
    test: &TestCase,
    config: RunConfig,
) -> Result<(ProfileRow, ExecutionResult), ProfileError> {
    let mut hook = ProfileHook::default();
    let opts = ExecOptions {
        step_limit: config.step_limit,
        sites: Some(&program.sites),
        forced_flip: config.forced_flip,
    };
    let result = execute(&program.program, &test.args, &mut hook, opts).map_err(|source| ProfileError::Exec {
        test: test.id.clone(),
        source,
    })?;
    let y = u8::from(test.fails(&result));
    Ok((hook.into_row(&program.sites, test.id.clone(), y), result))
}

/// Profiles the whole suite. Tests run in parallel; rows keep suite order.
pub fn run_suite(program: &InstrumentedProgram, suite: &TestSuite, config: RunConfig) -> Result<ProfileMatrix, ProfileError> {
    let rows = suite
        .tests
        .par_iter()
        .map(|t| run_test(program, t, config).map(|(row, _)| row))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ProfileMatrix { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::prepare;

    fn case(id: &str, args: Vec<Value>, expected: Option<&str>) -> TestCase {
        TestCase {
            id: id.into(),
            args,
            expected_stdout: expected.map(String::from),
        }
    }

    #[test]
    fn last_value_and_skipped_atoms() {
        let ip = prepare("fn main(a: int, b: int) {\n x = 0;\n while (x < a) { x = x + 1; }\n if (a > 1 && b > 1) { print(1); }\n}").unwrap();
        let suite = TestSuite {
            tests: vec![
                case("t1", vec![Value::Int(3), Value::Int(5)], Some("1\n")),
                case("t2", vec![Value::Int(0), Value::Int(5)], Some("1\n")),
            ],
        };
        let m = run_suite(&ip, &suite, RunConfig::default()).unwrap();
        let id = |n: &str| ip.sites.by_name("main", n).unwrap().id;
        assert_eq!(m.rows[0].y, 0);
        assert_eq!(m.rows[1].y, 1);
        assert_eq!(m.rows[0].value(id("x_3")), &Value::Int(3));
        assert_eq!(m.rows[1].value(id("x_3")), &Value::Na);
        // a > 1 is false for t2, so the second atom is skipped.
        assert_eq!(m.rows[1].value(id("P2_2_1")), &Value::Na);
        assert_eq!(m.rows[0].value(id("P2_2_1")), &Value::Bool(true));
        // Parents of the loop body assignment captured at its last execution.
        assert_eq!(m.rows[0].covariate(id("x_3"), id("x_2")), &Value::Int(2));
        let back = ProfileMatrix::read_jsonl(m.to_jsonl().as_bytes()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn completion_oracle() {
        let ip = prepare("fn main(a: int) { assert(a > 0); }").unwrap();
        let suite = TestSuite {
            tests: vec![case("ok", vec![Value::Int(1)], None), case("bad", vec![Value::Int(0)], None)],
        };
        let m = run_suite(&ip, &suite, RunConfig::default()).unwrap();
        assert_eq!((m.n_passing(), m.n_failing()), (1, 1));
    }

    #[test]
    fn suite_json_shape() {
        let s = TestSuite::from_json(r#"{"tests":[{"id":"a","args":[1,2.5,"x",true]}]}"#).unwrap();
        assert_eq!(s.tests[0].args, vec![Value::Int(1), Value::Float(2.5), Value::Str("x".into()), Value::Bool(true)]);
        assert_eq!(s.tests[0].oracle(), Oracle::ExpectCompletion);
    }
}
