//! ROUGE properties checked on a single (candidate, reference) pair.

use a3_core::metrics::{rouge_l, rouge_n, RougeScore};

const TOL: f64 = 1e-12;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL
}

fn in_unit(s: &RougeScore) -> bool {
    [s.precision, s.recall, s.f1].iter().all(|v| (0.0..=1.0 + TOL).contains(v))
}

fn scores(c: &[String], r: &[String]) -> [(&'static str, RougeScore); 3] {
    [("rouge-1", rouge_n(c, r, 1)), ("rouge-2", rouge_n(c, r, 2)), ("rouge-l", rouge_l(c, r))]
}

/// Swapping candidate and reference swaps precision and recall and keeps F1.
pub fn symmetry(a: &[String], b: &[String]) -> Result<(), String> {
    for ((name, ab), (_, ba)) in scores(a, b).into_iter().zip(scores(b, a)) {
        if !(close(ab.precision, ba.recall) && close(ab.recall, ba.precision) && close(ab.f1, ba.f1)) {
            return Err(format!("{name} not symmetric on {a:?} / {b:?}: {ab:?} vs {ba:?}"));
        }
        if !in_unit(&ab) {
            return Err(format!("{name} out of [0, 1] on {a:?} / {b:?}: {ab:?}"));
        }
    }
    Ok(())
}

/// Extending the candidate never lowers recall against a fixed reference.
pub fn monotonicity(candidate: &[String], extra: &[String], reference: &[String]) -> Result<(), String> {
    let longer: Vec<String> = candidate.iter().chain(extra).cloned().collect();
    for ((name, before), (_, after)) in scores(candidate, reference).into_iter().zip(scores(&longer, reference)) {
        if after.recall + TOL < before.recall {
            return Err(format!(
                "{name} recall fell from {} to {} after appending {extra:?} to {candidate:?} (reference {reference:?})",
                before.recall, after.recall
            ));
        }
    }
    Ok(())
}

/// Identity, disjoint and "a b c" / "a b d".
pub fn fixtures() -> Result<(), String> {
    let t = |s: &str| s.split_whitespace().map(str::to_string).collect::<Vec<_>>();
    let expect = |what: &str, got: RougeScore, p: f64, r: f64, f: f64| {
        if (got.precision - p).abs() < 1e-6 && (got.recall - r).abs() < 1e-6 && (got.f1 - f).abs() < 1e-6 {
            Ok(())
        } else {
            Err(format!("{what}: got {got:?}, want ({p}, {r}, {f})"))
        }
    };
    let same = t("the firm raised its target");
    for (name, s) in scores(&same, &same) {
        expect(&format!("identity {name}"), s, 1.0, 1.0, 1.0)?;
    }
    for (name, s) in scores(&t("a b c"), &t("x y z")) {
        expect(&format!("disjoint {name}"), s, 0.0, 0.0, 0.0)?;
    }
    let (c, r) = (t("a b c"), t("a b d"));
    expect("abc/abd rouge-1", rouge_n(&c, &r, 1), 2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0)?;
    expect("abc/abd rouge-2", rouge_n(&c, &r, 2), 0.5, 0.5, 0.5)?;
    expect("abc/abd rouge-l", rouge_l(&c, &r), 2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0)?;
    Ok(())
}
