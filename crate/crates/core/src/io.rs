//! JSON formats for games, absorption paths and behavior profiles.
//!
//! Scalars are read from JSON numbers or from strings such as `"47/8"`.
//! Writers emit a canonical form: exact values print as integers or `"p/q"`
//! strings, keys are sorted, and every multi-quitter payoff is explicit. Loading
//! a canonical document and saving it again reproduces it byte for byte.

use std::str::FromStr;

use serde_json::{json, Map, Number, Value};

use crate::error::{Error, Result};
use crate::game::{min_minus_one, ActionProfile, QuittingGame};
use crate::path::{AbsorptionPath, PathBlock};
use crate::scalar::{parse_rational, Scalar};
use crate::strategy::{BehaviorProfile, Tail};

/// Rule filling multi-quitter payoffs missing from a game file.
pub const MIN_MINUS_ONE: &str = "min_minus_one";

fn fmt_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

fn parse_json(text: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| fmt_err(format!("invalid JSON: {e}")))
}

fn render(v: &Value) -> String {
    let mut out = serde_json::to_string_pretty(v).expect("values built here always serialize");
    out.push('\n');
    out
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| fmt_err(format!("missing field \"{key}\"")))
}

fn as_object<'a>(v: &'a Value, what: &str) -> Result<&'a Map<String, Value>> {
    v.as_object().ok_or_else(|| fmt_err(format!("{what} must be an object")))
}

fn as_array<'a>(v: &'a Value, what: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| fmt_err(format!("{what} must be an array")))
}

pub fn scalar_from_json<S: Scalar>(v: &Value) -> Result<S> {
    let text = match v {
        Value::Number(n) => n.to_string(),
        Value::String(s) => s.clone(),
        _ => return Err(fmt_err(format!("expected a number, got {v}"))),
    };
    S::parse(&text).ok_or_else(|| fmt_err(format!("unparseable number {text:?}")))
}

pub fn scalar_to_json<S: Scalar>(x: &S) -> Value {
    if S::EXACT {
        let r = parse_rational(&x.to_string()).expect("exact scalars display as p/q");
        if r.is_integer() {
            Value::Number(Number::from_str(&r.numer().to_string()).expect("integer literal"))
        } else {
            Value::String(format!("{}/{}", r.numer(), r.denom()))
        }
    } else {
        let f = x.to_f64();
        // Whole floats print as `1.0` so the type survives a round trip.
        Number::from_f64(f).map_or(Value::Null, Value::Number)
    }
}

fn vec_from_json<S: Scalar>(v: &Value, what: &str) -> Result<Vec<S>> {
    as_array(v, what)?.iter().map(scalar_from_json).collect()
}

fn vec_to_json<S: Scalar>(v: &[S]) -> Value {
    Value::Array(v.iter().map(scalar_to_json).collect())
}

pub fn game_from_json<S: Scalar>(text: &str) -> Result<QuittingGame<S>> {
    let doc = parse_json(text)?;
    let obj = as_object(&doc, "game")?;
    let players: Vec<String> = as_array(field(obj, "players")?, "players")?
        .iter()
        .map(|p| p.as_str().map(str::to_owned).ok_or_else(|| fmt_err("player names must be strings")))
        .collect::<Result<_>>()?;
    let n = players.len();
    if n == 0 || n > 16 {
        return Err(fmt_err(format!("player count {n} outside 1..=16")));
    }
    let check_len = |v: &Vec<S>, what: &str| {
        if v.len() == n {
            Ok(())
        } else {
            Err(fmt_err(format!("{what} has {} entries, expected {n}", v.len())))
        }
    };
    let cont: Vec<S> = vec_from_json(field(obj, "continue_payoff")?, "continue_payoff")?;
    check_len(&cont, "continue_payoff")?;
    let mut payoffs: Vec<Option<Vec<S>>> = vec![None; 1 << n];
    payoffs[0] = Some(cont);
    for entry in as_array(field(obj, "payoffs")?, "payoffs")? {
        let e = as_object(entry, "payoff entry")?;
        let mut mask = 0u32;
        for q in as_array(field(e, "quitters")?, "quitters")? {
            let i = q.as_u64().filter(|i| (*i as usize) < n).ok_or_else(|| fmt_err(format!("bad quitter index {q}")))?;
            if mask & (1 << i) != 0 {
                return Err(fmt_err(format!("quitter {i} listed twice")));
            }
            mask |= 1 << i;
        }
        if mask == 0 {
            return Err(fmt_err("empty quitter set"));
        }
        let payoff: Vec<S> = vec_from_json(field(e, "payoff")?, "payoff")?;
        check_len(&payoff, "payoff")?;
        if payoffs[mask as usize].replace(payoff).is_some() {
            return Err(fmt_err(format!("duplicate payoff for {}", ActionProfile(mask).label())));
        }
    }
    let rule = match obj.get("default_multi_quit") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) if s == MIN_MINUS_ONE => Some(()),
        Some(other) => return Err(fmt_err(format!("unknown default_multi_quit rule {other}"))),
    };
    let single: Vec<Vec<S>> = (0..n)
        .map(|i| payoffs[1 << i].clone().ok_or_else(|| fmt_err(format!("missing payoff for player {i} quitting alone"))))
        .collect::<Result<_>>()?;
    let full = payoffs
        .into_iter()
        .enumerate()
        .map(|(mask, p)| match (p, rule) {
            (Some(p), _) => Ok(p),
            (None, Some(())) => Ok(min_minus_one(&single, ActionProfile(mask as u32))),
            (None, None) => Err(fmt_err(format!("missing payoff for {}", ActionProfile(mask as u32).label()))),
        })
        .collect::<Result<Vec<_>>>()?;
    QuittingGame::new(players, full)
}

pub fn game_to_json<S: Scalar>(game: &QuittingGame<S>) -> String {
    let n = game.n();
    let payoffs: Vec<Value> = (1u32..(1 << n))
        .map(|mask| {
            let quitters: Vec<usize> = ActionProfile(mask).quitters().collect();
            json!({ "quitters": quitters, "payoff": vec_to_json(&game.payoffs_by_mask()[mask as usize]) })
        })
        .collect();
    render(&json!({
        "players": game.players(),
        "continue_payoff": vec_to_json(game.continue_payoff()),
        "payoffs": payoffs,
    }))
}

fn block_from_json<S: Scalar>(v: &Value) -> Result<PathBlock<S>> {
    let obj = as_object(v, "path block")?;
    match (obj.get("jump"), obj.get("flow"), obj.len()) {
        (Some(j), None, 1) => {
            let j = as_object(j, "jump")?;
            Ok(PathBlock::Jump { xi: vec_from_json(field(j, "xi")?, "xi")? })
        }
        (None, Some(f), 1) => {
            let f = as_object(f, "flow")?;
            Ok(PathBlock::Flow { z: vec_from_json(field(f, "z")?, "z")?, rho: scalar_from_json(field(f, "rho")?)? })
        }
        _ => Err(fmt_err("a path block is {\"jump\": ...} or {\"flow\": ...}")),
    }
}

fn block_to_json<S: Scalar>(b: &PathBlock<S>) -> Value {
    match b {
        PathBlock::Jump { xi } => json!({ "jump": { "xi": vec_to_json(xi) } }),
        PathBlock::Flow { z, rho } => json!({ "flow": { "z": vec_to_json(z), "rho": scalar_to_json(rho) } }),
    }
}

fn block_len<S>(b: &PathBlock<S>) -> usize {
    match b {
        PathBlock::Jump { xi } => xi.len(),
        PathBlock::Flow { z, .. } => z.len(),
    }
}

/// Player count from an explicit `"n"` or from the first block or stage.
fn infer_n(obj: &Map<String, Value>, first: Option<usize>) -> Result<usize> {
    match obj.get("n") {
        Some(v) => v.as_u64().map(|n| n as usize).ok_or_else(|| fmt_err("\"n\" must be a non-negative integer")),
        None => first.ok_or_else(|| fmt_err("cannot infer the player count; add \"n\"")),
    }
}

pub fn path_from_json<S: Scalar>(text: &str) -> Result<AbsorptionPath<S>> {
    let doc = parse_json(text)?;
    let obj = as_object(&doc, "path")?;
    let blocks = |key: &str| -> Result<Option<Vec<PathBlock<S>>>> {
        match obj.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => as_array(v, key)?.iter().map(block_from_json).collect::<Result<_>>().map(Some),
        }
    };
    let prefix = blocks("prefix")?.unwrap_or_default();
    let cycle = blocks("cycle")?;
    let first = prefix.iter().chain(cycle.iter().flatten()).next().map(block_len);
    let n = infer_n(obj, first)?;
    if obj.get("non_absorbing").and_then(Value::as_bool).unwrap_or(false) {
        if cycle.is_some() {
            return Err(fmt_err("a non-absorbing path has no cycle"));
        }
        return AbsorptionPath::non_absorbing(n, prefix);
    }
    AbsorptionPath::new(n, prefix, cycle)
}

pub fn path_to_json<S: Scalar>(path: &AbsorptionPath<S>) -> String {
    let mut obj = Map::new();
    obj.insert("n".into(), json!(path.n()));
    obj.insert("prefix".into(), Value::Array(path.prefix().iter().map(block_to_json).collect()));
    if let Some(c) = path.cycle() {
        obj.insert("cycle".into(), Value::Array(c.iter().map(block_to_json).collect()));
    }
    if path.is_non_absorbing() {
        obj.insert("non_absorbing".into(), Value::Bool(true));
    }
    render(&Value::Object(obj))
}

fn stages_from_json(v: &Value, what: &str) -> Result<Vec<Vec<f64>>> {
    as_array(v, what)?.iter().map(|s| vec_from_json(s, "stage")).collect()
}

fn stages_to_json(stages: &[Vec<f64>]) -> Value {
    Value::Array(stages.iter().map(|s| vec_to_json(s)).collect())
}

pub fn profile_from_json(text: &str) -> Result<BehaviorProfile> {
    let doc = parse_json(text)?;
    let obj = as_object(&doc, "profile")?;
    let prefix = match obj.get("prefix") {
        None => Vec::new(),
        Some(v) => stages_from_json(v, "prefix")?,
    };
    let (tail, tail_first) = match obj.get("tail") {
        None => (Tail::AllContinue, None),
        Some(t) => {
            let t = as_object(t, "tail")?;
            match field(t, "kind")?.as_str() {
                Some("all_continue") => (Tail::AllContinue, None),
                Some("repeat_last") => (Tail::RepeatLast, None),
                Some("cycle") => {
                    let stages = stages_from_json(field(t, "stages")?, "stages")?;
                    let first = stages.first().map(Vec::len);
                    (Tail::Cycle(stages), first)
                }
                _ => return Err(fmt_err("tail kind is all_continue, repeat_last or cycle")),
            }
        }
    };
    let n = infer_n(obj, prefix.first().map(Vec::len).or(tail_first))?;
    BehaviorProfile::new(n, prefix, tail)
}

pub fn profile_to_json(profile: &BehaviorProfile) -> String {
    let tail = match profile.tail() {
        Tail::AllContinue => json!({ "kind": "all_continue" }),
        Tail::RepeatLast => json!({ "kind": "repeat_last" }),
        Tail::Cycle(stages) => json!({ "kind": "cycle", "stages": stages_to_json(stages) }),
    };
    render(&json!({ "n": profile.n(), "prefix": stages_to_json(profile.prefix()), "tail": tail }))
}
