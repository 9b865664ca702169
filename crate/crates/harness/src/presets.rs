//! Desk-scale preset experiments, written as config text.
//!
//! Every preset finishes in well under two minutes on one core. Step sizes
//! are set explicitly where the analytical defaults are too conservative to
//! show anything at this scale.

pub const NAMES: [&str; 8] = [
    "sc_smooth",
    "sc_nonsmooth",
    "c_smooth",
    "c_nonsmooth",
    "illcond_sweep",
    "sparsity",
    "isotonic",
    "lewis_overton",
];

const SC_SMOOTH: &[&str] = &[
    "label = vs_sqn\nscheme = VS_SQN\nn = 20\nkappa = 100\nm = 1\ngamma0 = 0.05\nbatch = geometric\nn0 = 1\nrate = 0.95\nbudget = 1000000\nrepetitions = 3",
    "label = apg\nscheme = APG_BASELINE\nn = 20\nkappa = 100\nbatch = geometric\nn0 = 1\nrate = 0.95\nbudget = 1000000\nrepetitions = 3",
];

const SC_NONSMOOTH: &[&str] = &[
    "label = moreau\nscheme = SVS_SQN_MOREAU\nn = 10\nkappa = 10\nlambda_l1 = 0.5\nnoise = 0.01\nspread = 0.1\nstep = 0.1\nbatch = geometric\nn0 = 1\nrate = 0.9\nbudget = 1000000\nrepetitions = 3",
    "label = diminishing\nscheme = SVS_SQN_DIMINISHING\nn = 10\nkappa = 10\nlambda_l1 = 0.5\nnoise = 0.01\nspread = 0.1\nbudget = 1000000\nrepetitions = 3",
];

const C_SMOOTH: &[&str] = &[
    "label = rvs_sqn\nscheme = RVS_SQN\nconvexity = c\nn = 20\nkappa = 10\ngamma0 = 0.1\nhorizon = 128\nrepetitions = 3",
    "label = sgd\nscheme = SGD\nconvexity = c\nn = 20\nkappa = 10\nbatch = constant\nn0 = 1\nbudget = 900000\nrepetitions = 3",
];

const C_NONSMOOTH: &[&str] = &[
    "label = rsvs_k500\nscheme = RSVS_SQN\nconvexity = c\nn = 20\nkappa = 10\nlambda_l1 = 0.1\nhorizon = 500\nrepetitions = 3",
    "label = rsvs_k1000\nscheme = RSVS_SQN\nconvexity = c\nn = 20\nkappa = 10\nlambda_l1 = 0.1\nhorizon = 1000\nrepetitions = 3",
];

const ILLCOND: &[&str] = &[
    "label = vs_m1\nscheme = VS_SQN\nn = 20\nkappa = 1e5\nm = 1\ngamma0 = 0.3\nbatch = geometric\nn0 = 1\nrate = 0.95\nbudget = 1000000\nrepetitions = 3",
    "label = vs_m10\nscheme = VS_SQN\nn = 20\nkappa = 1e5\nm = 10\ngamma0 = 0.3\nbatch = geometric\nn0 = 1\nrate = 0.95\nbudget = 1000000\nrepetitions = 3",
    "label = apg\nscheme = APG_BASELINE\nn = 20\nkappa = 1e5\nbatch = geometric\nn0 = 1\nrate = 0.95\nbudget = 1000000\nrepetitions = 3",
];

const SPARSITY_PROBLEM: &str =
    "problem = logistic\nsamples = 2000\nn = 500\ndensity = 0.02\nsupport = 0.1\nlambda_l1 = 1e-3\nl1_term = sqrt\nlambda2 = 1e-8\nbudget = 100000\n";

const ISOTONIC: &[&str] = &[
    "label = rsvs\nscheme = RSVS_SQN\nproblem = isotonic\nsamples = 200\nn = 20\nlambda_l1 = 0.1\npenalty_scale = 0.01\nc_gamma = 0.05\nhorizon = 1000\nrepetitions = 3",
];

/// Config texts of the preset, one per run configuration.
pub fn preset(name: &str) -> Option<Vec<String>> {
    let own = |v: &[&str]| v.iter().map(|s| s.to_string()).collect();
    Some(match name {
        "sc_smooth" => own(SC_SMOOTH),
        "sc_nonsmooth" => own(SC_NONSMOOTH),
        "c_smooth" => own(C_SMOOTH),
        "c_nonsmooth" => own(C_NONSMOOTH),
        "illcond_sweep" => own(ILLCOND),
        "sparsity" => vec![
            format!("{SPARSITY_PROBLEM}label = rvs_sqn\nscheme = RVS_SQN\ngamma0 = 1\nrepetitions = 3"),
            format!("{SPARSITY_PROBLEM}label = sgd_avg\nscheme = SGD\nbatch = constant\nn0 = 1\nrepetitions = 3"),
        ],
        "isotonic" => own(ISOTONIC),
        "lewis_overton" => {
            let mut v: Vec<String> = (0..8)
                .map(|i| {
                    let t = i as f64 * std::f64::consts::FRAC_PI_4;
                    format!(
                        "label = start{i}\nscheme = SVS_SQN_DIMINISHING\nproblem = lewis_overton\nx0 = {},{}\nbatch = constant\nn0 = 1\nhorizon = 500\nlog = every",
                        t.cos(),
                        t.sin()
                    )
                })
                .collect();
            v.push("label = start_2_2\nscheme = SVS_SQN_DIMINISHING\nproblem = lewis_overton\nx0 = 2,2\nbatch = constant\nn0 = 1\nhorizon = 500\nlog = every".into());
            v
        }
        _ => return None,
    })
}
