use waldspurger::chars::{chars_up_to, quadratic_char};
use waldspurger::ScDatum;

fn main() {
    for xi in [1u64, 2] {
        let sc = ScDatum::build(5, 3, xi, 0).unwrap();
        let quad = quadratic_char(&sc.fgroup);
        for eta in chars_up_to(&sc.fgroup, 1).into_iter().take(2) {
            let f = sc.c_quotient_formula(&quad, &eta).unwrap().to_float();
            let r = sc.c_quotient_ratio(&quad, &eta).unwrap().to_float();
            println!("xi={xi} eta={:?} formula=({:.4},{:.4}) ratio=({:.4},{:.4})", eta.key(), f.re, f.im, r.re, r.im);
        }
    }
}
