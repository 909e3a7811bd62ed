//! Email identity.
//!
//! Deliberately small grammar: `local "@" label ("." label)+`, with the
//! local part 1..=64 chars of `[a-z0-9._%+-]` and each label 1..=63 chars of
//! `[a-z0-9-]` that neither starts nor ends with `-`. Input is trimmed and
//! lowercased before matching.

/// Trimmed, lowercased form used for storage and comparison.
pub fn normalize_email(raw: &str) -> String {
    raw.trim().to_lowercase()
}

pub fn validate_email(raw: &str) -> bool {
    let email = normalize_email(raw);
    let Some((local, domain)) = email.split_once('@') else {
        return false;
    };
    valid_local(local) && valid_domain(domain)
}

/// Normalized address if valid.
pub fn parse_email(raw: &str) -> Option<String> {
    validate_email(raw).then(|| normalize_email(raw))
}

fn valid_local(local: &str) -> bool {
    (1..=64).contains(&local.len())
        && local
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'.' | b'_' | b'%' | b'+' | b'-'))
}

fn valid_domain(domain: &str) -> bool {
    let labels: Vec<&str> = domain.split('.').collect();
    labels.len() >= 2 && labels.iter().all(|l| valid_label(l))
}

fn valid_label(label: &str) -> bool {
    (1..=63).contains(&label.len())
        && !label.starts_with('-')
        && !label.ends_with('-')
        && label.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-')
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_plain_address() {
        assert!(validate_email("anna@example.pl"));
    }

    #[test]
    fn rejects_missing_at() {
        assert!(!validate_email("no-at-sign"));
    }

    #[test]
    fn normalizes_case_and_whitespace() {
        assert!(validate_email("  Anna@Example.PL  "));
        assert_eq!(parse_email("  Anna@Example.PL  ").as_deref(), Some("anna@example.pl"));
    }

    #[test]
    fn grammar_edges() {
        assert!(!validate_email("anna@localhost"), "needs two labels");
        assert!(!validate_email("@example.pl"));
        assert!(!validate_email("anna@@example.pl"));
        assert!(!validate_email("anna@-example.pl"));
        assert!(!validate_email("anna@example-.pl"));
        assert!(!validate_email("anna@example..pl"));
        assert!(!validate_email("an na@example.pl"));
        assert!(!validate_email("anna@exam_ple.pl"));
        assert!(!validate_email("żaneta@example.pl"));
        assert!(validate_email("a.b_c%d+e-f@sub.example-1.pl"));
        assert!(validate_email(&format!("{}@example.pl", "a".repeat(64))));
        assert!(!validate_email(&format!("{}@example.pl", "a".repeat(65))));
        assert!(validate_email(&format!("a@{}.pl", "b".repeat(63))));
        assert!(!validate_email(&format!("a@{}.pl", "b".repeat(64))));
    }
}
