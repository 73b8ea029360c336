use proptest::prelude::*;
use vpdiff_core::oracle::terms::{arb_case, check_case, Op};
use vpdiff_core::term::BinOp;

const CASES: u32 = 10_000;

macro_rules! operator_tests {
    ($($name:ident => $op:expr,)*) => {$(
        proptest! {
            #![proptest_config(ProptestConfig { cases: CASES, failure_persistence: None, ..ProptestConfig::default() })]
            #[test]
            fn $name((e, a) in arb_case($op)) {
                if let Err(msg) = check_case(&e, &a) {
                    return Err(TestCaseError::fail(msg));
                }
            }
        }
    )*};
}

operator_tests! {
    not_is_sound => Op::Not,
    neg_is_sound => Op::Neg,
    add_is_sound => Op::Bin(BinOp::Add),
    sub_is_sound => Op::Bin(BinOp::Sub),
    mul_is_sound => Op::Bin(BinOp::Mul),
    and_is_sound => Op::Bin(BinOp::And),
    or_is_sound => Op::Bin(BinOp::Or),
    xor_is_sound => Op::Bin(BinOp::Xor),
    shl_is_sound => Op::Bin(BinOp::Shl),
    lshr_is_sound => Op::Bin(BinOp::Lshr),
    eq_is_sound => Op::Bin(BinOp::Eq),
    ult_is_sound => Op::Bin(BinOp::Ult),
    ule_is_sound => Op::Bin(BinOp::Ule),
    zext_is_sound => Op::Zext,
    trunc_is_sound => Op::Trunc,
    ite_is_sound => Op::Ite,
}

#[test]
fn every_operator_is_covered() {
    assert_eq!(Op::all().len(), 16);
}
