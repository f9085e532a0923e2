"""
From station CSVs to a firm-year panel
======================================

Weather comes as one row per county and day.  Firms come as one row per
firm and year.  Joining them keeps a firm-year only when its county has
enough valid temperature days.  The join report says why each dropped
row was dropped.
"""

# %%
import io

from tempfe.paneldata import join_firm_weather, parse_firm_csv, parse_weather_csv

weather_csv = "county_code,date,temp_c,wind,sea_hpa,visb\n" + "".join(
    f"110105,2015-01-{d:02d},{-3 + d * 0.5:.1f},2.5,1021.3,9.1\n" for d in range(1, 29)
) + "110105,2015-01-29,not-a-number,2.5,1021.3,9.1\n"

firms_csv = """firm_id,year,city_code,ownership,industry_code,cvalue
A001,2015,110105,Private,C13,0.42
A002,2015,999999,Foreign,C13,0.37
A003,2015,110105,StateOwned,C26,
"""

weather = parse_weather_csv(io.StringIO(weather_csv))
print("parse errors:", [str(e) for e in weather.errors])

firms = parse_firm_csv(io.StringIO(firms_csv))

# %%
# Only 28 valid days exist here, so lower the coverage threshold for the demo.
panel = join_firm_weather(firms, weather, min_coverage_days=20)
print(panel.join_report.to_text())
print(panel.frame.T)
