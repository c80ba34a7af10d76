import not_a_real_module_anywhere


def uses_missing():
    value = not_a_real_module_anywhere.thing()
    return value
