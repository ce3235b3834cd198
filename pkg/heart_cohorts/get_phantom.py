import heart_cohorts


def get_phantom(kind: str, seed=None, **param_kwargs):

    if kind not in heart_cohorts.supported_kinds:
        raise ValueError(f'The phantom kind {kind} is not recognized. Must be one of {heart_cohorts.supported_kinds}.')

    from heart_cohorts.phantoms.phantom import PhantomParams, make_phantom
    if seed is not None:
        import numpy as np
        params = PhantomParams.sample(np.random.default_rng(seed), **param_kwargs)
    else:
        params = PhantomParams(**param_kwargs)
    return make_phantom(params, kind)
