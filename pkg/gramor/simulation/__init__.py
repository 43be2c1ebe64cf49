from gramor.simulation.simulate import (
    MeanErrorCurve,
    SimulationConfig,
    bilinear_simulate_paired,
    euler_maruyama_paired,
    mixed_gramian_ode_oracle,
)
