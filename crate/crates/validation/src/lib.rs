//! Holds the `acceptance` test target, which checks each acceptance
//! criterion and prints one PASS or FAIL line per criterion.
