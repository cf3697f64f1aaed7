#![no_main]

use libfuzzer_sys::fuzz_target;

use guillemin_ma::expr::parse_expr;
use guillemin_ma::geometry::Point;

fuzz_target!(|data: &[u8]| {
    if let Ok(src) = std::str::from_utf8(data) {
        if let Ok(expr) = parse_expr(src) {
            // Parsed expressions must evaluate without panicking, including
            // out-of-range edge references (NaN) and division by zero (inf).
            let ls = [0.25, 0.5, 0.75, 1.0];
            let _ = expr.eval(Point::new(0.3, 0.7), &ls);
            let _ = expr.eval(Point::new(0.0, 0.0), &[]);
            let _ = expr.max_edge_index();
        }
    }
});
