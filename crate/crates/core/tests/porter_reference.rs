use abusecnn::corpus::porter_stem;

#[test]
fn matches_reference_vectors() {
    let data = include_str!("data/porter_reference.txt");
    let mut checked = 0;
    let mut failures = Vec::new();
    for line in data.lines().filter(|l| !l.starts_with('#')) {
        let (word, stem) = line.split_once('\t').unwrap();
        let got = porter_stem(word);
        if got != stem {
            failures.push(format!("{word}: expected {stem}, got {got}"));
        }
        checked += 1;
    }
    assert!(checked > 2000);
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}
