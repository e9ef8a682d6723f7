"""Reference first-order SLD resolution over tuple terms, independent of the
engine (functional substitutions, textbook unification).

Terms: ("c", name) constants, ("v", name) variables, ("s", f, t1, ..., tn)
structures.  A clause is (head, [body atoms]); the program is a clause list
in presentation order.
"""


def walk(t, s):
    while t[0] == "v" and t in s:
        t = s[t]
    return t


def unify(a, b, s):
    a = walk(a, s)
    b = walk(b, s)
    if a == b:
        return s
    if a[0] == "v":
        if occurs(a, b, s):
            return None
        s2 = dict(s)
        s2[a] = b
        return s2
    if b[0] == "v":
        return unify(b, a, s)
    if a[0] == "s" and b[0] == "s" and a[1] == b[1] and len(a) == len(b):
        for x, y in zip(a[2:], b[2:]):
            s = unify(x, y, s)
            if s is None:
                return None
        return s
    return None


def occurs(v, t, s):
    t = walk(t, s)
    if t == v:
        return True
    if t[0] == "s":
        return any(occurs(v, x, s) for x in t[2:])
    return False


def rename(t, n):
    if t[0] == "v":
        return ("v", f"{t[1]}#{n}")
    if t[0] == "s":
        return ("s", t[1]) + tuple(rename(x, n) for x in t[2:])
    return t


def resolve(t, s):
    t = walk(t, s)
    if t[0] == "s":
        return ("s", t[1]) + tuple(resolve(x, s) for x in t[2:])
    return t


def solve(program, goals, s, counter, depth=2000):
    """Leftmost-selection, clause-order SLD; yields substitutions."""
    if depth <= 0:
        return
    if not goals:
        yield s
        return
    goal, rest = goals[0], goals[1:]
    for head, body in program:
        counter[0] += 1
        n = counter[0]
        h = rename(head, n)
        b = [rename(x, n) for x in body]
        s2 = unify(goal, h, s)
        if s2 is not None:
            yield from solve(program, b + rest, s2, counter, depth - 1)


def answers(program, query, qvars):
    out = []
    for s in solve(program, [query], {}, [0]):
        out.append(tuple((v[1], resolve(v, s)) for v in qvars))
    return out
