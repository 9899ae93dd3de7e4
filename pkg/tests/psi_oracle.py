"""Hand expansion of Psi for n = 1, N = 1 in plain scalar arithmetic.

Kept free of numpy and of the package so it can serve as an independent
check of the block assembler. Ordering of the augmented state:
``[X, u(1), u_x(0), U_0, U_1]``.

For N = 1 the derivation matrix is [[0, 0], [2, 0]] and its square vanishes.
The Gram factors use the order N+1 = 2 and N+2 = 3 operators expanded by hand:

    L_3 = [[0,0,0,0],[2,0,0,0],[0,6,0,0],[2,0,10,0]],
    L_3^2 has entries (2,0) = 12 and (3,1) = 60.
"""


def psi_scalar(a, b, c, gamma, p, q0, q1, t00, t01, t11, alpha, beta):
    g = gamma
    m = [[0.0] * 5 for _ in range(5)]

    def put(i, j, v):
        m[i][j] += v
        if i != j:
            m[j][i] += v

    # Psi tilde
    put(0, 0, 2.0 * (p * a + 2.0 * g * q1 * c))
    put(0, 1, p * b - 2.0 * g * q1)
    put(0, 2, -g * (q0 - q1) - alpha * g * c - beta * a * c)
    put(0, 3, a * q0 + 2.0 * g * c * t01)
    put(0, 4, a * q1 + 2.0 * g * c * t11)
    put(1, 2, -beta * b * c)
    put(1, 3, b * q0 - 2.0 * g * t01)
    put(1, 4, b * q1 - 2.0 * g * t11)
    put(2, 3, -g * (t00 - t01))
    put(2, 4, -g * (t01 - t11))

    # Psi_2 = G diag(1, 3, 5) G^T
    G = [
        [-c, c, -c],
        [1.0, 1.0, 1.0],
        [0.0, 0.0, 0.0],
        [0.0, -2.0, 0.0],
        [0.0, 0.0, -6.0],
    ]
    w2 = [1.0, 3.0, 5.0]
    # Psi_3 = H diag(1, 3, 5, 7) H^T
    H = [
        [0.0, 2.0 * c, -6.0 * c, 12.0 * c],
        [0.0, -2.0, -6.0, -12.0],
        [-1.0, 1.0, -1.0, 1.0],
        [0.0, 0.0, 12.0, 0.0],
        [0.0, 0.0, 0.0, 60.0],
    ]
    w3 = [1.0, 3.0, 5.0, 7.0]
    for i in range(5):
        for j in range(5):
            s2 = sum(G[i][k] * w2[k] * G[j][k] for k in range(3))
            s3 = sum(H[i][k] * w3[k] * H[j][k] for k in range(4))
            m[i][j] -= alpha * g * s2 + 2.0 * beta * g * s3
    return m
