use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use inspiration::envs::Env;
use inspiration::io::{save_params, ParamsFile};
use inspiration::model::init_params;
use inspiration::trainer::ActionSpace;
use inspiration_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(insp_last_error()) }.to_string_lossy().into_owned()
}

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

#[test]
fn env_round_trip_matches_core() {
    unsafe {
        let mut env: *mut InspEnv = ptr::null_mut();
        assert_eq!(insp_env_new(cstr("grid4").as_ptr(), InspActionKind::Primitive, &mut env), InspStatus::Ok);
        let (mut obs_dim, mut n) = (0, 0);
        assert_eq!(insp_env_dims(env, &mut obs_dim, &mut n), InspStatus::Ok);
        assert_eq!((obs_dim, n), (2, 4));

        let mut obs = [0.0; 2];
        assert_eq!(insp_env_reset(env, 0, obs.as_mut_ptr(), 2), InspStatus::Ok);
        let mut peeked = [0.0; 2];
        assert_eq!(insp_env_peek(env, obs.as_ptr(), 2, 3, peeked.as_mut_ptr()), InspStatus::Ok);
        let (mut r, mut done) = (f64::NAN, true);
        assert_eq!(insp_env_step(env, 3, obs.as_mut_ptr(), 2, &mut r, &mut done), InspStatus::Ok);
        assert_eq!(obs, peeked);
        assert!(!done);
        assert_eq!(r, 0.0);

        assert_eq!(insp_env_step(env, 9, obs.as_mut_ptr(), 2, &mut r, &mut done), InspStatus::InvalidArgument);
        assert!(!last_error().is_empty());
        assert_eq!(insp_env_step(env, 0, obs.as_mut_ptr(), 1, &mut r, &mut done), InspStatus::BufferTooSmall);
        let mut c = [0.5, 0.5];
        assert_eq!(
            insp_env_step_continuous(env, c.as_mut_ptr(), 2, obs.as_mut_ptr(), 2, &mut r, &mut done),
            InspStatus::InvalidArgument
        );
        insp_env_free(env);
    }
}

#[test]
fn episode_over_until_reset() {
    unsafe {
        let mut env: *mut InspEnv = ptr::null_mut();
        assert_eq!(insp_env_new(cstr("grid4").as_ptr(), InspActionKind::Macro, &mut env), InspStatus::Ok);
        let mut obs = [0.0; 2];
        insp_env_reset(env, 0, obs.as_mut_ptr(), 2);
        let (mut r, mut done) = (0.0, false);
        let mut steps = 0;
        // bump into the top wall until the step cap ends the episode
        while !done {
            assert_eq!(insp_env_step(env, 0, obs.as_mut_ptr(), 2, &mut r, &mut done), InspStatus::Ok);
            steps += 1;
        }
        assert!(steps <= 20);
        assert_eq!(insp_env_step(env, 0, obs.as_mut_ptr(), 2, &mut r, &mut done), InspStatus::EpisodeOver);
        assert_eq!(insp_env_reset(env, 0, obs.as_mut_ptr(), 2), InspStatus::Ok);
        assert_eq!(insp_env_step(env, 0, obs.as_mut_ptr(), 2, &mut r, &mut done), InspStatus::Ok);
        insp_env_free(env);
    }
}

#[test]
fn continuous_env() {
    unsafe {
        let mut env: *mut InspEnv = ptr::null_mut();
        assert_eq!(insp_env_new(cstr("grid7").as_ptr(), InspActionKind::Continuous, &mut env), InspStatus::InvalidArgument);
        assert!(env.is_null());
        assert_eq!(insp_env_new(cstr("point").as_ptr(), InspActionKind::Continuous, &mut env), InspStatus::Ok);
        let mut obs = [0.0; 4];
        insp_env_reset(env, 0, obs.as_mut_ptr(), 4);
        let c = [1.0, 1.0];
        let (mut r, mut done) = (0.0, false);
        assert_eq!(insp_env_step_continuous(env, c.as_ptr(), 2, obs.as_mut_ptr(), 4, &mut r, &mut done), InspStatus::Ok);
        assert!(obs[2] > 0.0 && obs[3] > 0.0);
        assert!(r < 0.0);
        insp_env_free(env);
    }
}

#[test]
fn model_load_forward_classify() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.params");
    let env = Env::preset("grid7").unwrap();
    let params = init_params(3, 2, &[8], 4, false).unwrap();
    let expected = params.policy_value(&inspiration::types::StateVec(vec![0.5, -0.5])).unwrap();
    save_params(
        &path,
        &ParamsFile {
            env: "grid7".into(),
            space: ActionSpace::Discrete(env.primitive_actions().unwrap()),
            params,
        },
    )
    .unwrap();
    unsafe {
        let mut m: *mut InspModel = ptr::null_mut();
        let p = cstr(path.to_str().unwrap());
        assert_eq!(insp_model_load(p.as_ptr(), &mut m), InspStatus::Ok);
        let (mut obs_dim, mut n) = (0, 0);
        insp_model_dims(m, &mut obs_dim, &mut n);
        assert_eq!((obs_dim, n), (2, 4));
        let obs = [0.5, -0.5];
        let mut logits = [0.0; 4];
        let mut v = 0.0;
        assert_eq!(insp_model_forward(m, obs.as_ptr(), 2, logits.as_mut_ptr(), 4, &mut v), InspStatus::Ok);
        assert_eq!(logits.to_vec(), expected.0);
        assert_eq!(v, expected.1);
        assert_eq!(insp_model_forward(m, obs.as_ptr(), 2, logits.as_mut_ptr(), 3, &mut v), InspStatus::BufferTooSmall);
        assert_eq!(insp_model_forward(m, obs.as_ptr(), 1, logits.as_mut_ptr(), 4, &mut v), InspStatus::InvalidArgument);
        let mut c = 0.0;
        assert_eq!(insp_model_classify(m, obs.as_ptr(), obs.as_ptr(), 2, &mut c), InspStatus::Ok);
        // fresh classifier heads start at exactly one half
        assert_eq!(c, 0.5);
        insp_model_free(m);

        let missing = cstr(dir.path().join("none.params").to_str().unwrap());
        assert_eq!(insp_model_load(missing.as_ptr(), &mut m), InspStatus::IoError);
        assert!(last_error().contains("none.params"));
        std::fs::write(dir.path().join("bad.params"), "format=something-else\n---\n").unwrap();
        let bad = cstr(dir.path().join("bad.params").to_str().unwrap());
        assert_eq!(insp_model_load(bad.as_ptr(), &mut m), InspStatus::ParseError);
        assert_eq!(insp_model_load(ptr::null(), &mut m), InspStatus::NullPointer);
    }
}

#[test]
fn rewards_and_utilities() {
    unsafe {
        let scores = [0.2, 0.7, 0.4, 0.7];
        let mut r = 0.0;
        assert_eq!(insp_reward(InspRewardMode::Pref, scores.as_ptr(), 4, 2, &mut r), InspStatus::Ok);
        assert_eq!(r, 0.5);
        assert_eq!(insp_reward(InspRewardMode::Basic, scores.as_ptr(), 4, 1, &mut r), InspStatus::Ok);
        assert_eq!(r, 0.7);
        let mut total = 0.0;
        for a in 0..4 {
            insp_reward(InspRewardMode::Soft, scores.as_ptr(), 4, a, &mut r);
            total += r;
        }
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(insp_reward(InspRewardMode::Pref, scores.as_ptr(), 4, 4, &mut r), InspStatus::InvalidArgument);
        let bad = [0.0, 0.5];
        assert_eq!(insp_reward(InspRewardMode::Pref, bad.as_ptr(), 2, 0, &mut r), InspStatus::InvalidArgument);

        let mut err = 1.0;
        assert_eq!(insp_grad_check(0, 1e-5, &mut err), InspStatus::Ok);
        assert!(err < 1e-4);
        assert_eq!(insp_grad_check(0, 0.0, &mut err), InspStatus::InvalidArgument);

        let pts = [0.0, 0.0, 0.1, 0.0, 5.0, 5.0, 5.1, 5.0];
        let mut out = [0.0; 4];
        assert_eq!(insp_kmeans(pts.as_ptr(), 4, 2, 2, 0, out.as_mut_ptr(), 4), InspStatus::Ok);
        assert_eq!(out, [0.05, 0.0, 5.05, 5.0]);
        assert_eq!(insp_kmeans(pts.as_ptr(), 4, 2, 2, 0, out.as_mut_ptr(), 3), InspStatus::BufferTooSmall);
        assert_eq!(insp_kmeans(pts.as_ptr(), 4, 2, 5, 0, out.as_mut_ptr(), 4), InspStatus::InvalidArgument);

        assert!(!last_error().is_empty());
        assert_eq!(insp_kmeans(pts.as_ptr(), 4, 2, 1, 0, out.as_mut_ptr(), 4), InspStatus::Ok);
        assert!(last_error().is_empty(), "a success clears the message");
        assert!(!CStr::from_ptr(insp_version()).to_str().unwrap().is_empty());
    }
}

#[test]
fn generated_header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include").join("inspiration.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["insp_env_new", "insp_model_forward", "insp_reward", "insp_kmeans", "INSP_STATUS_OK"] {
        assert!(text.contains(name), "{name} missing from the header");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"inspiration.h\"\nint main(void) { InspEnv *e = 0; return insp_env_new(\"grid4\", INSP_ACTION_KIND_PRIMITIVE, &e) == INSP_STATUS_OK ? 0 : 1; }\n",
    )
    .unwrap();
    match Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header.parent().unwrap())
        .arg(&src)
        .status()
    {
        Ok(status) => assert!(status.success(), "header does not compile"),
        Err(_) => eprintln!("no C compiler on PATH; header syntax not checked"),
    }
}
