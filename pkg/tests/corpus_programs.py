"""Regression corpus: program files with their queries, shared by the
interpreter tests, the VM differential tests and the acceptance suite."""

import os

HERE = os.path.dirname(__file__)


def program_text(name: str) -> str:
    with open(os.path.join(HERE, "programs", name), "r", encoding="utf-8") as fh:
        return fh.read()


def query_cap(q):
    """Corpus queries are either a string or (string, max answers)."""
    if isinstance(q, tuple):
        return q
    return q, None


# (program file, [queries]); a query may carry an answer cap
CORPUS = [
    (
        "ex1_mapfun.hopl",
        [
            "mapfun (a :: b :: nil) (x\\ g a x) L.",
            "mapfun (a :: b :: nil) F ((g a a) :: (g a b) :: nil).",
            "mapfun (a :: nil) F ((g a a) :: nil).",
            "mapfun L (x\\ g x x) ((g a a) :: nil).",
            "mapfun (a :: b :: nil) (g a) L.",
            "mapfun nil F nil.",
        ],
    ),
    (
        "ex2_mappred.hopl",
        [
            "mappred (bob :: sue :: nil) parent L.",
            "mappred (bob :: sue :: nil) (x\\ y\\ sigma z\\ (parent x z), (parent z y)) L.",
            "mappred (bob :: sue :: nil) P (john :: dick :: nil).",
            "mappred (kate :: nil) parent L.",
        ],
    ),
    (
        "nrev.hopl",
        [
            "append (e1 :: e2 :: nil) (e3 :: nil) L.",
            "append X Y (e1 :: e2 :: e3 :: nil).",
            "nrev (e1 :: e2 :: e3 :: e4 :: nil) R.",
            ("nrev L (e1 :: e2 :: nil).", 1),  # diverges past the first answer
        ],
    ),
    (
        "peano.hopl",
        [
            "plus (s (s z)) (s z) N.",
            "plus M N (s (s z)).",
            "times (s (s z)) (s (s (s z))) K.",
        ],
    ),
    (
        "hoapply.hopl",
        [
            "apply q a.",
            "apply q X.",
            "apply P a.",
            "apply (x\\ q x) b.",
        ],
    ),
    (
        "orgoals.hopl",
        [
            "r X.",
            "r c.",
            "q a ; s a.",
        ],
    ),
    (
        "sigmagoal.hopl",
        [
            "hop n1 Y.",
            "hop X n3.",
            "sigma y\\ hop n1 y.",
        ],
    ),
    (
        "residual.hopl",
        [
            "p (F b).",
            "p (G a).",
        ],
    ),
    (
        "foldr.hopl",
        [
            "foldr g b (a :: b :: nil) R.",
            "foldr F b nil R.",
            "foldr g X (a :: nil) (g a b).",
        ],
    ),
    (
        "hofact.hopl",
        [
            "likes F.",
            "likes (x\\ f x).",
            "likes (x\\ g x a).",
        ],
    ),
    (
        "grandp.hopl",
        [
            "grandparent bob Y.",
            "grandparent X mary.",
        ],
    ),
    (
        "beta.hopl",
        [
            "appfun (x\\ g x x) a R.",
            "appfun ((x\\ y\\ g y x) b) a R.",
            "eq ((x\\ g x x) a) (g a a).",
            "appfun F a (g a a).",
        ],
    ),
]
