"""Fit per-event hardware energies from whole-run power measurements.

A power meter on a chip only reports joules per inference. The simulator
reports how many synaptic events S and neuron updates U that inference
performed. Two networks with different S/U balance give two equations for
the two unknowns (e_syn_J, e_upd_J); extra measurements turn the solve
into a least-squares fit with a covariance we can propagate into
predictions for networks we never measured.

The "meter" here is synthetic: energies are generated from planted
parameters plus gaussian noise, so the fit can be checked against truth.
"""

import numpy as np

from emacprof import (
    Coding,
    NetworkBuilder,
    NeuronKind,
    NeuronModelSpec,
    encode,
    fit_energy_model,
    model_to_json,
    observation_from_run,
    predict_energy,
    run_dataset,
)

E_SYN_TRUE = 0.9e-9  # joules per synaptic event
E_UPD_TRUE = 3.1e-9  # joules per neuron update
NOISE_REL = 0.01  # meter noise, 1 percent of each reading
N_SAMPLES = 40
N_IN = 64


def dense_net(hidden: int, depth: int, seed: int):
    rng = np.random.default_rng(seed)
    model = NeuronModelSpec(kind=NeuronKind.IFL, v_th=1.0)
    b = NetworkBuilder((N_IN,), coding=Coding.RATE, max_timesteps=24)
    fan = N_IN
    for _ in range(depth):
        b.dense(hidden, model, weights=rng.uniform(0.0, 1.6 / fan, size=hidden * fan))
        fan = hidden
    b.dense(10, model, weights=rng.uniform(0.0, 1.6 / fan, size=10 * fan))
    return b.build()


def profile(net, seed: int):
    rng = np.random.default_rng(seed)
    samples = [
        encode(rng.uniform(0.1, 0.7, size=N_IN), "poisson", seed=1000 + k)
        for k in range(N_SAMPLES)
    ]
    return run_dataset(net, samples)


def meter_reading(stats, rng) -> float:
    true = E_SYN_TRUE * stats.mean_synaptic_events + E_UPD_TRUE * stats.mean_update_count
    return true * (1.0 + NOISE_REL * rng.standard_normal())


def main() -> None:
    meter = np.random.default_rng(99)

    # Five measured operating points spanning shallow-wide to deep-narrow,
    # so S and U move independently and the fit has spare equations to
    # estimate its own noise from.
    configs = [
        ("wide-1x128", 128, 1),
        ("deep-4x16", 16, 4),
        ("mid-2x48", 48, 2),
        ("deep-3x32", 32, 3),
        ("wide-1x80", 80, 1),
    ]
    observations = []
    for k, (name, hidden, depth) in enumerate(configs):
        net = dense_net(hidden, depth, seed=k)
        stats = profile(net, seed=depth)
        obs = observation_from_run(name, stats, meter_reading(stats, meter))
        observations.append(obs)
        print(
            f"{name:10s} S={obs.S:12.1f} U={obs.U:9.1f} "
            f"E={obs.E_joules * 1e6:8.3f} uJ  ({stats.n_ok}/{stats.n_samples} ok)"
        )

    model = fit_energy_model(observations)
    print()
    print(f"fitted e_syn = {model.e_syn_J * 1e9:.4f} nJ (true {E_SYN_TRUE * 1e9:.4f})")
    print(f"fitted e_upd = {model.e_upd_J * 1e9:.4f} nJ (true {E_UPD_TRUE * 1e9:.4f})")
    sig_syn, sig_upd = np.sqrt(np.diag(model.cov))
    print(f"         sigma = ({sig_syn * 1e9:.4f}, {sig_upd * 1e9:.4f}) nJ, "
          f"residual rms = {model.residual_rms * 1e9:.2f} nJ")

    # Predict a network the meter never saw and check against a fresh
    # synthetic reading. predict_energy's sigma covers the fitted
    # parameters only; the reading we compare against is itself noisy, so
    # the honest yardstick adds the meter noise in quadrature.
    held_out = dense_net(72, 3, seed=5)
    stats = profile(held_out, seed=17)
    pred, sigma = predict_energy(model, stats.mean_synaptic_events, stats.mean_update_count)
    measured = meter_reading(stats, meter)
    yardstick = np.hypot(sigma, NOISE_REL * measured)
    print()
    print(f"held-out 3x72 net: predicted {pred * 1e6:.3f} uJ +- {sigma * 1e6:.3f}")
    print(f"                   measured  {measured * 1e6:.3f} uJ "
          f"({abs(pred - measured) / yardstick:.1f} sigma, meter noise included)")

    print()
    print(model_to_json(model).decode())


if __name__ == "__main__":
    main()
