//! Home of the `acceptance` test target; run it with `cargo test -p gode-validation --test acceptance`.
