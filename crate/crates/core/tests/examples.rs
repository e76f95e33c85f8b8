//! Every example runs to completion.

macro_rules! examples {
    ($($name:ident => $path:literal),* $(,)?) => {
        $(
            #[path = $path]
            mod $name;

            #[test]
            fn $name() {
                $name::run_example().unwrap();
            }
        )*
    };
}

examples!(
    set_algebra => "../examples/set_algebra.rs",
    polyp_dependences => "../examples/polyp_dependences.rs",
    gespmm_race_check => "../examples/gespmm_race_check.rs",
    miniir_extraction => "../examples/miniir_extraction.rs",
    oracle_cross_check => "../examples/oracle_cross_check.rs",
    iscc_emission => "../examples/iscc_emission.rs",
    cli_session => "../examples/cli_session.rs",
);
