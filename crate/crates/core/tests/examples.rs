// SPDX-License-Identifier: Apache-2.0

//! Every cargo example runs to completion.

macro_rules! example {
    ($name:ident) => {
        #[allow(dead_code)]
        mod $name {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", stringify!($name), ".rs"));
        }

        #[test]
        fn $name() {
            $name::run_example().unwrap();
        }
    };
}

example!(parse_netlist);
example!(graph_analysis);
example!(generate_corpus);
example!(featurize);
example!(train_and_infer);
example!(relic_baseline);
example!(rectify);
example!(cross_validate);
