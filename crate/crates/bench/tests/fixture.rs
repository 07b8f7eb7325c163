use twophase_bench::fixture;

#[test]
fn fixture_is_deterministic() {
    let a = fixture(8);
    let b = fixture(8);
    assert_eq!(a.state.phi.data, b.state.phi.data);
    assert_eq!(a.state.v.x, b.state.v.x);
    let (ca, cb) = (a.solve_ch(1e-3), b.solve_ch(1e-3));
    assert_eq!(ca.phi.data, cb.phi.data);
}
