//! Plain-text smoke-test scripts, one API call per line.
//!
//! ```text
//! # comments and blank lines are ignored
//! AUTH none
//! POST /api/users {"email":"anna-${run}@example.pl","display_name":"Anna"} -> 201 save anna_id=user.id
//! POST /api/sessions {"email":"anna-${run}@example.pl"} -> 201 save anna=token
//! AUTH anna
//! GET /api/users/me -> 200 expect user.display_name=Anna
//! POST /api/requests/${req}/accept -> 201|409
//! ```
//!
//! `AUTH <var>` sends the value of `var` as the bearer token on later calls;
//! `AUTH none` drops it. `SET name=value` defines a variable. `${name}` is
//! replaced anywhere in a call line. Built-ins: `run` (unique per run),
//! `now` and `tomorrow` (RFC 3339). `save name=path` stores a field of the
//! response body; `expect path=value` compares one, where `value` is read as
//! JSON when it parses and as a string otherwise (quote it to include
//! spaces). Paths are dotted, with numeric segments indexing arrays.
//!
//! The whole script is parsed before anything is sent, so a typo never
//! leaves a half-applied run behind.

use std::collections::HashMap;
use std::fmt;

use reqwest::Method;
use serde_json::Value;

use crate::{Client, ClientError};

#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Auth(Option<String>),
    Set { name: String, value: String },
    Call(Call),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Call {
    pub method: String,
    pub path: String,
    pub body: Option<String>,
    pub statuses: Vec<u16>,
    pub saves: Vec<(String, String)>,
    pub expects: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub number: usize,
    pub text: String,
    pub step: Step,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Script {
    pub lines: Vec<Line>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

fn parse_err(line: usize, message: impl Into<String>) -> ParseError {
    ParseError { line, message: message.into() }
}

fn split_assignment(s: &str) -> Option<(String, String)> {
    let (k, v) = s.split_once('=')?;
    (!k.is_empty()).then(|| (k.to_owned(), v.to_owned()))
}

fn is_var_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl Script {
    pub fn parse(text: &str) -> Result<Script, ParseError> {
        let mut lines = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let number = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let step = parse_line(number, trimmed)?;
            lines.push(Line { number, text: trimmed.to_owned(), step });
        }
        Ok(Script { lines })
    }

    pub fn calls(&self) -> usize {
        self.lines.iter().filter(|l| matches!(l.step, Step::Call(_))).count()
    }
}

fn parse_line(n: usize, line: &str) -> Result<Step, ParseError> {
    let (verb, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
    let rest = rest.trim();
    match verb {
        "AUTH" => match rest {
            "" => Err(parse_err(n, "AUTH needs a variable name or `none`")),
            "none" => Ok(Step::Auth(None)),
            v if is_var_name(v) => Ok(Step::Auth(Some(v.to_owned()))),
            v => Err(parse_err(n, format!("bad variable name {v:?}"))),
        },
        "SET" => {
            let (name, value) =
                split_assignment(rest).ok_or_else(|| parse_err(n, "SET needs name=value"))?;
            if !is_var_name(&name) {
                return Err(parse_err(n, format!("bad variable name {name:?}")));
            }
            Ok(Step::Set { name, value })
        }
        "GET" | "POST" => parse_call(n, verb, rest).map(Step::Call),
        other => Err(parse_err(n, format!("unknown verb {other:?}"))),
    }
}

fn parse_call(n: usize, method: &str, rest: &str) -> Result<Call, ParseError> {
    let (request, outcome) =
        rest.rsplit_once(" -> ").ok_or_else(|| parse_err(n, "missing `-> <status>`"))?;
    let request = request.trim();
    let (path, body) = match request.split_once(char::is_whitespace) {
        Some((p, b)) => (p, Some(b.trim().to_owned())),
        None => (request, None),
    };
    if !path.starts_with('/') {
        return Err(parse_err(n, format!("path must start with '/': {path:?}")));
    }
    if method == "GET" && body.is_some() {
        return Err(parse_err(n, "GET takes no body"));
    }
    let words = clause_words(outcome).map_err(|m| parse_err(n, m))?;
    let mut words = words.iter().map(String::as_str);
    let statuses = words
        .next()
        .ok_or_else(|| parse_err(n, "missing expected status"))?
        .split('|')
        .map(|s| match s.parse::<u16>() {
            Ok(code) if (100..600).contains(&code) => Ok(code),
            _ => Err(parse_err(n, format!("bad status {s:?}"))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut saves = Vec::new();
    let mut expects = Vec::new();
    while let Some(kw) = words.next() {
        let arg = words.next().ok_or_else(|| parse_err(n, format!("`{kw}` needs an argument")))?;
        let pair = split_assignment(arg).ok_or_else(|| parse_err(n, format!("expected key=value after `{kw}`")))?;
        match kw {
            "save" if is_var_name(&pair.0) => saves.push(pair),
            "save" => return Err(parse_err(n, format!("bad variable name {:?}", pair.0))),
            "expect" => expects.push(pair),
            other => return Err(parse_err(n, format!("unknown clause {other:?}"))),
        }
    }
    Ok(Call { method: method.to_owned(), path: path.to_owned(), body, statuses, saves, expects })
}

/// Splits on whitespace, keeping double-quoted runs (JSON strings) whole.
fn clause_words(text: &str) -> Result<Vec<String>, String> {
    let mut words = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut escaped = false;
    for c in text.chars() {
        if quoted {
            cur.push(c);
            match (escaped, c) {
                (true, _) => escaped = false,
                (false, '\\') => escaped = true,
                (false, '"') => quoted = false,
                _ => {}
            }
        } else if c.is_whitespace() {
            if !cur.is_empty() {
                words.push(std::mem::take(&mut cur));
            }
        } else {
            quoted = c == '"';
            cur.push(c);
        }
    }
    if quoted {
        return Err("unterminated quote".into());
    }
    if !cur.is_empty() {
        words.push(cur);
    }
    Ok(words)
}

/// Looks up a dotted path such as `engagement.state` or `0.request.id`.
pub fn lookup<'a>(value: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.').filter(|s| !s.is_empty()).try_fold(value, |v, seg| match v {
        Value::Array(items) => seg.parse::<usize>().ok().and_then(|i| items.get(i)),
        Value::Object(map) => map.get(seg),
        _ => None,
    })
}

fn substitute(text: &str, vars: &HashMap<String, String>) -> Result<String, String> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(start) = rest.find("${") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after.find('}').ok_or("unterminated ${")?;
        let name = &after[..end];
        let value = vars.get(name).ok_or_else(|| format!("undefined variable {name:?}"))?;
        out.push_str(value);
        rest = &after[end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

fn as_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineResult {
    pub number: usize,
    pub text: String,
    pub status: Option<u16>,
    /// Empty on success.
    pub failures: Vec<String>,
}

impl LineResult {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

impl fmt::Display for LineResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed() { "ok  " } else { "FAIL" };
        write!(f, "{tag} L{:<3} {}", self.number, self.text)?;
        for fail in &self.failures {
            write!(f, "\n       {fail}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub lines: Vec<LineResult>,
    pub vars: HashMap<String, String>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.lines.iter().all(LineResult::passed)
    }

    pub fn failed(&self) -> usize {
        self.lines.iter().filter(|l| !l.passed()).count()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    /// Lines that completed before the service went away are in `partial`.
    #[error("after {} call(s): {source}", partial.lines.len())]
    Unreachable { partial: Report, source: ClientError },
}

/// Variables every run starts with.
pub fn builtin_vars() -> HashMap<String, String> {
    let now = chrono::Utc::now();
    let run = format!("{}{}", now.format("%H%M%S%f"), std::process::id());
    HashMap::from([
        ("run".to_owned(), run),
        ("now".to_owned(), now.to_rfc3339()),
        ("tomorrow".to_owned(), (now + chrono::Duration::hours(24)).to_rfc3339()),
    ])
}

/// Runs every line in order. Assertion failures are collected and the run
/// goes on; losing the service stops it.
pub async fn run(
    script: &Script,
    client: &Client,
    mut vars: HashMap<String, String>,
    mut on_line: impl FnMut(&LineResult),
) -> Result<Report, RunError> {
    let mut token: Option<String> = None;
    let mut results = Vec::new();
    for line in &script.lines {
        let mut result =
            LineResult { number: line.number, text: line.text.clone(), status: None, failures: Vec::new() };
        match &line.step {
            Step::Auth(None) => token = None,
            Step::Auth(Some(var)) => match vars.get(var) {
                Some(t) => token = Some(t.clone()),
                None => {
                    token = None;
                    result.failures.push(format!("undefined variable {var:?}"));
                }
            },
            Step::Set { name, value } => match substitute(value, &vars) {
                Ok(v) => {
                    vars.insert(name.clone(), v);
                }
                Err(e) => result.failures.push(e),
            },
            Step::Call(call) => {
                let caller = match &token {
                    Some(t) => client.with_token(t.clone()),
                    None => client.anonymous(),
                };
                match execute(call, &caller, &mut vars).await {
                    Ok((status, failures)) => {
                        result.status = Some(status);
                        result.failures = failures;
                    }
                    Err(ExecError::Local(msg)) => result.failures.push(msg),
                    Err(ExecError::Remote(source)) => {
                        let partial = Report { lines: results, vars };
                        return Err(RunError::Unreachable { partial, source });
                    }
                }
            }
        }
        on_line(&result);
        results.push(result);
    }
    Ok(Report { lines: results, vars })
}

enum ExecError {
    Local(String),
    Remote(ClientError),
}

async fn execute(
    call: &Call,
    client: &Client,
    vars: &mut HashMap<String, String>,
) -> Result<(u16, Vec<String>), ExecError> {
    let path = substitute(&call.path, vars).map_err(ExecError::Local)?;
    let body = match &call.body {
        Some(b) => {
            let text = substitute(b, vars).map_err(ExecError::Local)?;
            let json = serde_json::from_str::<Value>(&text)
                .map_err(|e| ExecError::Local(format!("body is not JSON: {e}")))?;
            Some(json)
        }
        None => None,
    };
    let method = if call.method == "GET" { Method::GET } else { Method::POST };
    let (status, value) = client.raw(method, &path, body.as_ref()).await.map_err(|e| match e {
        ClientError::Unreachable(_) => ExecError::Remote(e),
        other => ExecError::Local(other.to_string()),
    })?;

    let mut failures = Vec::new();
    if !call.statuses.contains(&status) {
        let want = call.statuses.iter().map(u16::to_string).collect::<Vec<_>>().join("|");
        failures.push(format!("status: expected {want}, got {status}: {value}"));
        return Ok((status, failures));
    }
    for (var, field) in &call.saves {
        match lookup(&value, field) {
            Some(v) => {
                vars.insert(var.clone(), as_text(v));
            }
            None => failures.push(format!("save {var}: no field {field:?} in {value}")),
        }
    }
    for (field, expected) in &call.expects {
        let expected = match substitute(expected, vars) {
            Ok(e) => e,
            Err(e) => {
                failures.push(e);
                continue;
            }
        };
        let want = serde_json::from_str::<Value>(&expected).unwrap_or(Value::String(expected.clone()));
        match lookup(&value, field) {
            Some(got) if *got == want || as_text(got) == expected => {}
            Some(got) => failures.push(format!("expect {field}: want {want}, got {got}")),
            None => failures.push(format!("expect {field}: missing in {value}")),
        }
    }
    Ok((status, failures))
}
