//! Holds the `acceptance` integration test target; the criteria live in `ist_lab::acceptance`.
