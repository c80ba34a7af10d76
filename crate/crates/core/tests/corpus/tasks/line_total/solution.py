def line_total(price, qty):
    subtotal = price * qty
    if qty >= 10:
        subtotal = subtotal * 0.9
    return round(subtotal, 2)
